# epslens/certificates.py
"""Re-verification of report certificates from their embedded data alone."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from epslens.contracts import (
    CBCertificate,
    Certificate,
    ChainCertificate,
    ChainKind,
    CoverCertificate,
    DefinitionEnvelope,
    EmbeddingCertificate,
    EpslensError,
    GlueDefinitionDocument,
    MeasurementCertificate,
    MedianDefinitionDocument,
    RamseyCertificate,
    Report,
    WitnessSetCertificate,
)
from epslens.definability import GlueDefinition, definition_from_document
from epslens.gluing import lipschitz_ratio
from epslens.ramsey import monochromatic_triangles, verify_ramsey
from epslens.settings import get_settings
from epslens.stability import WeightedBipartiteStructure
from epslens.topometric import TopometricSpace, cb_analyze, derivative_closed
from epslens.typespace import TwoLayerFixture, extension_audit, fs_level, symmetry_audit
from epslens.value_space import (
    ValuePoint,
    ValueSpace,
    embedding_distortion,
    encode_values,
    value_distance_array,
)

logger = logging.getLogger(__name__)

EMBEDDING_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CertificateCheck:
    kind: str
    passed: bool
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "passed": self.passed, "reason": self.reason}


def _dense(space: ValueSpace, encoded: Sequence[Sequence[float]]) -> np.ndarray:
    return encode_values(space, [space.decode(v) for v in encoded])


def _grid(space: ValueSpace, rows: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    dense = [_dense(space, line) for line in rows]
    return np.stack(dense) if dense else np.zeros((0, 0))


def check_chain(cert: ChainCertificate, tol: float) -> CertificateCheck:
    space = ValueSpace.from_document(cert.space)
    size = len(cert.row_labels)
    if size < 2 or len(cert.col_labels) != size or len(cert.values) != size:
        return CertificateCheck("chain", False, "malformed chain block")
    if len(set(zip(cert.row_labels, cert.col_labels))) != size:
        return CertificateCheck("chain", False, "chain pairs are not distinct")
    block = _grid(space, cert.values)
    upper = np.triu_indices(size, k=1)
    if cert.chain_kind is ChainKind.PLAIN:
        disc = value_distance_array(space, block, block.swapaxes(0, 1))[upper]
        low = float(disc.min())
        ok = low > cert.epsilon if cert.strict else low >= cert.epsilon - tol
        return CertificateCheck("chain", ok, f"min discrepancy {low}")
    if cert.r is None or cert.s is None or cert.delta is None:
        return CertificateCheck("chain", False, "bi-constant chain without r, s, delta")
    r = _dense(space, [cert.r])[0]
    s = _dense(space, [cert.s])[0]
    apart = float(value_distance_array(space, r, s))
    if apart < cert.epsilon - tol:
        return CertificateCheck("chain", False, f"d(r, s) = {apart} below epsilon")
    to_r = value_distance_array(space, block, r)[upper]
    to_s = value_distance_array(space, block, s).T[upper]
    ok = bool(np.all(to_r <= cert.delta + tol) and np.all(to_s <= cert.delta + tol))
    return CertificateCheck("chain", ok, "" if ok else "off-diagonal values leave the delta balls")


def check_ramsey(cert: RamseyCertificate, tol: float) -> CertificateCheck:
    if not cert.verified:
        return CertificateCheck("ramsey", True, "unverified lookup value; nothing to re-check")
    result = verify_ramsey(cert.s)
    if result.value != cert.value or not result.verified:
        return CertificateCheck("ramsey", False, f"recomputed R({cert.s},{cert.s}) = {result.value}")
    if monochromatic_triangles(cert.lower_bound_vertices, cert.lower_bound_red_edges):
        return CertificateCheck("ramsey", False, "lower-bound colouring has a monochromatic triangle")
    return CertificateCheck("ramsey", True)


def check_witness_set(cert: WitnessSetCertificate, tol: float) -> CertificateCheck:
    space = ValueSpace.from_document(cert.space)
    p = _dense(space, cert.type_values)
    m = len(cert.col_labels)
    if p.shape[0] != m:
        return CertificateCheck("witness_set", False, "type length does not match the columns")
    premise = np.ones((m, m), dtype=bool)
    for row in cert.row_values:
        values = _dense(space, row)
        premise &= value_distance_array(space, values[:, None, ...], values[None, :, ...]) < cert.delta
    spread = value_distance_array(space, p[:, None, ...], p[None, :, ...])
    bad = np.argwhere(premise & (spread >= 2 * cert.epsilon + cert.gamma))
    if bad.size:
        b, c = (int(v) for v in bad[0])
        return CertificateCheck("witness_set", False, f"columns {cert.col_labels[b]}, {cert.col_labels[c]} violate the bound")
    return CertificateCheck("witness_set", True)


def check_glue_definition(cert: GlueDefinitionDocument, tol: float) -> CertificateCheck:
    if not cert.column_inputs:
        return CertificateCheck("glue_definition", False, "no embedded columns")
    if len(cert.column_inputs) != len(cert.type_values):
        return CertificateCheck("glue_definition", False, "column inputs and type values differ in length")
    definition = GlueDefinition.from_document(cert)
    worst = 0.0
    for column, target in zip(cert.column_inputs, cert.type_values):
        point = [definition.input_space.decode(v) for v in column]
        got = np.asarray(definition.evaluate(point).coords, dtype=np.float64)
        worst = max(worst, float(np.abs(got - np.asarray(target)).max()) if got.size else 0.0)
    if worst > cert.error_bound + tol:
        return CertificateCheck("glue_definition", False, f"error {worst} exceeds {cert.error_bound}")
    if worst > cert.sup_error + tol:
        return CertificateCheck("glue_definition", False, f"error {worst} exceeds the claimed {cert.sup_error}")
    for h in definition.coordinates:
        if h.anchors.shape[0] > 1 and lipschitz_ratio(h, h.anchors) > h.lipschitz_bound + tol:
            return CertificateCheck("glue_definition", False, "Lipschitz bound fails on the anchors")
    return CertificateCheck("glue_definition", True, f"error {worst}")


def check_median_definition(cert: MedianDefinitionDocument, tol: float) -> CertificateCheck:
    if not cert.column_inputs:
        return CertificateCheck("median_definition", False, "no embedded columns")
    width = len(cert.row_labels)
    if width % 2 == 0:
        return CertificateCheck("median_definition", False, f"median of {width} rows is not a middle value")
    if any(len(column) != width for column in cert.column_inputs):
        return CertificateCheck("median_definition", False, "column inputs do not match the rows")
    if len(cert.column_inputs) != len(cert.type_values):
        return CertificateCheck("median_definition", False, "column inputs and type values differ in length")
    medians = np.median(np.asarray(cert.column_inputs, dtype=np.float64), axis=1)
    error = float(np.abs(medians - np.asarray(cert.type_values)).max())
    if error > cert.epsilon + tol:
        return CertificateCheck("median_definition", False, f"error {error} exceeds {cert.epsilon}")
    if error > cert.sup_error + tol:
        return CertificateCheck("median_definition", False, f"error {error} exceeds the claimed {cert.sup_error}")
    return CertificateCheck("median_definition", True, f"error {error}")


def check_cover(cert: CoverCertificate, tol: float) -> CertificateCheck:
    space = ValueSpace.from_document(cert.space)
    rows = _grid(space, cert.row_values)
    index = {label: i for i, label in enumerate(cert.row_labels)}
    covered = sorted(index[label] for part in cert.parts for label in part if label in index)
    if covered != list(range(len(cert.row_labels))):
        return CertificateCheck("cover", False, "parts do not partition the rows")
    dist = value_distance_array(space, rows[:, None, ...], rows[None, :, ...]).max(axis=2)
    for part in cert.parts:
        idx = [index[label] for label in part]
        diameter = float(dist[np.ix_(idx, idx)].max())
        if diameter > 2 * cert.epsilon + tol:
            return CertificateCheck("cover", False, f"part {part} has diameter {diameter}")
    return CertificateCheck("cover", True, f"{len(cert.parts)} parts")


def check_cb(cert: CBCertificate, tol: float) -> CertificateCheck:
    index = {label: i for i, label in enumerate(cert.points)}
    generators = [sum(1 << index[label] for label in labels) for labels in cert.closed_generators]
    space = TopometricSpace.build(cert.points, cert.metric, generators, force_discrete=True)
    by_open = cb_analyze(space, cert.epsilon)
    by_closed = cb_analyze(space, cert.epsilon, derivative=derivative_closed)
    if by_open.levels != by_closed.levels:
        return CertificateCheck("cb", False, "derivative forms disagree")
    levels = [space.labels(level) for level in by_open.levels]
    if levels != cert.levels or dict(zip(space.points, by_open.ranks)) != cert.ranks:
        return CertificateCheck("cb", False, "recomputed levels or ranks differ")
    return CertificateCheck("cb", by_open.analyzable == cert.analyzable)


def check_embedding(cert: EmbeddingCertificate, tol: float) -> CertificateCheck:
    space = ValueSpace.finite_metric(cert.metric)
    images = [ValuePoint.vector(row) for row in cert.images]
    if len(images) != space.size:
        return CertificateCheck("embedding", False, "image count does not match the metric")
    distortion = embedding_distortion(space, images)
    return CertificateCheck("embedding", distortion <= EMBEDDING_TOLERANCE, f"distortion {distortion}")


def _fixture(cert: MeasurementCertificate) -> TwoLayerFixture:
    space = ValueSpace.from_document(cert.space)
    inputs = cert.inputs
    grid = [[space.decode(v) for v in line] for line in inputs["values"]]
    table = WeightedBipartiteStructure.from_points(
        rows=inputs["rows"], cols=inputs["cols"], space=space, grid=grid
    )
    return TwoLayerFixture.from_labels(table, inputs["m_rows"], inputs["m_cols"])


def _definition(raw: dict[str, Any]) -> Any:
    return definition_from_document(DefinitionEnvelope.model_validate({"definition": raw}).definition)


def check_measurement(cert: MeasurementCertificate, tol: float) -> CertificateCheck:
    name = cert.name
    inputs, claimed = cert.inputs, cert.claimed
    if name == "diameter":
        space = ValueSpace.from_document(cert.space)
        values = _dense(space, inputs["values"])
        diameter = float(value_distance_array(space, values[:, None, ...], values[None, :, ...]).max()) if len(values) else 0.0
        ok = abs(diameter - float(claimed["diameter"])) <= tol
        return CertificateCheck("measurement", ok, f"diameter {diameter}")
    fx = _fixture(cert)
    table = fx.table
    if name == "fs_level":
        level = fs_level(fx, table.row_index(inputs["row"]))
        ok = abs(level - float(claimed["level"])) <= tol
        return CertificateCheck("measurement", ok, f"fs level {level}")
    if name == "extension":
        report = extension_audit(
            fx,
            _definition(inputs["definition"]),
            table.row_index(inputs["row"]),
            float(inputs["delta"]),
            float(inputs["epsilon"]),
        )
        ok = (
            abs(report.n_error - float(claimed["n_error"])) <= tol
            and abs(report.m_error - float(claimed["m_error"])) <= tol
            and report.bound_holds == claimed["bound_holds"]
        )
        return CertificateCheck("measurement", ok, f"extension error {report.n_error}")
    report_s = symmetry_audit(
        fx,
        table.row_index(inputs["p_row"]),
        _definition(inputs["psi_p"]),
        float(inputs["delta_p"]),
        table.col_index(inputs["q_col"]),
        _definition(inputs["psi_q"]),
        float(inputs["delta_q"]),
        float(inputs["epsilon"]),
    )
    ok = abs(report_s.distance - float(claimed["distance"])) <= tol and report_s.bound_holds == claimed["bound_holds"]
    return CertificateCheck("measurement", ok, f"symmetry distance {report_s.distance}")


_CHECKERS: dict[type, Callable[[Any, float], CertificateCheck]] = {
    ChainCertificate: check_chain,
    RamseyCertificate: check_ramsey,
    WitnessSetCertificate: check_witness_set,
    GlueDefinitionDocument: check_glue_definition,
    MedianDefinitionDocument: check_median_definition,
    CoverCertificate: check_cover,
    CBCertificate: check_cb,
    EmbeddingCertificate: check_embedding,
    MeasurementCertificate: check_measurement,
}


def verify_certificate(cert: Certificate, *, tolerance: float | None = None) -> CertificateCheck:
    tol = get_settings().tolerance if tolerance is None else tolerance
    checker = _CHECKERS[type(cert)]
    try:
        return checker(cert, tol)
    except (EpslensError, KeyError) as exc:
        return CertificateCheck(str(cert.kind), False, f"certificate data rejected: {exc}")


def verify_report(report: Report, *, tolerance: float | None = None) -> list[CertificateCheck]:
    checks = [verify_certificate(cert, tolerance=tolerance) for cert in report.certificates]
    failed = [c for c in checks if not c.passed]
    if failed:
        logger.warning("%d of %d certificates failed re-verification", len(failed), len(checks))
    return checks
