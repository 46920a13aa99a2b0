# epslens/cli.py
"""Batch command-line front end: ``epslens <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
from pydantic import ValidationError

from epslens import __version__
from epslens.adapters.persistence import (
    read_fixture,
    read_matrix_csv,
    read_metric_csv,
    read_report,
    read_structure,
    read_topometric,
    read_type_column,
    write_definition,
    write_json,
    write_profile_csv,
)
from epslens.certificates import verify_report
from epslens.contracts import (
    Certificate,
    Command,
    CoverMethod,
    DefinitionStrategy,
    EmbeddingCertificate,
    EpslensError,
    LawStatus,
    MeasurementCertificate,
    Report,
    RunConfig,
    SearchMode,
    SizeGuardExceeded,
)
from epslens.definability import (
    Definition,
    InstabilityEvidence,
    OracleFailure,
    TypeFunction,
    build_definition,
    find_witness_rows,
    glue_definition,
)
from epslens.formula import FiniteStructure, diam_structure, materialize_matrix, parse_formula
from epslens.laws import finite_stability_fact, seminorm_audit
from epslens.ramsey import verify_ramsey
from epslens.settings import get_settings
from epslens.stability import WeightedBipartiteStructure, detect_chain, stability_profile
from epslens.stable_ids import derive_definition_id, payload_digest
from epslens.topometric import TopometricSpace, cb_analyze, row_space_cb
from epslens.typespace import (
    TwoLayerFixture,
    cover_rows,
    extension_audit,
    fs_level,
    measurement_certificate,
    random_fixture,
    symmetry_audit,
)
from epslens.value_space import ValueSpace, embed_finite_metric, embedding_distortion, encode_values

logger = logging.getLogger(__name__)

Outcome = tuple[dict[str, Any], list[Certificate], int]


def _matrix(cfg: RunConfig, *, second: bool = False) -> WeightedBipartiteStructure:
    path = cfg.matrix2 if second else cfg.matrix
    if path is None:
        raise EpslensError(f"{cfg.command.value}: --{'matrix2' if second else 'matrix'} is required")
    space = read_metric_csv(cfg.metric) if cfg.metric is not None else None
    return read_matrix_csv(path, space=space)


def _fixture(cfg: RunConfig) -> TwoLayerFixture:
    if cfg.fixture is None:
        logger.info("no fixture given; generating one from seed %d", cfg.seed)
        return random_fixture(seed=cfg.seed)
    space = read_metric_csv(cfg.metric) if cfg.metric is not None else None
    doc, table = read_fixture(cfg.fixture, space=space)
    return TwoLayerFixture.from_labels(table, doc.m_rows, doc.m_cols)


# ------------------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------------------


def _detect(cfg: RunConfig) -> Outcome:
    cfg.require("epsilon", "k")
    assert cfg.epsilon is not None and cfg.k is not None
    f = _matrix(cfg)
    detection = detect_chain(
        f, cfg.epsilon, cfg.k, bi_constant=cfg.bi_constant, delta=cfg.delta or 0.0, mode=cfg.mode
    )
    results: dict[str, Any] = {
        "found": detection.found,
        "exhaustive": detection.exhaustive,
        "mode": detection.mode.value,
        "chain": detection.chain.to_dict() if detection.chain else None,
    }
    certificates: list[Certificate] = []
    if detection.chain is not None:
        certificates.append(detection.chain.to_certificate(cfg.epsilon))
    return results, certificates, 0


def _profile(cfg: RunConfig) -> Outcome:
    cfg.require("k_max")
    assert cfg.k_max is not None
    f = _matrix(cfg)
    profile = stability_profile(f, cfg.k_max, mode=cfg.mode)
    if cfg.profile_csv is not None:
        write_profile_csv(cfg.profile_csv, profile)
    results = {
        "epsilon": profile.as_dict(),
        "diameter": profile.diameter,
        "certified": profile.mode is SearchMode.EXACT,
        "refuted_next": {str(e.k): e.refuted_next for e in profile.entries},
    }
    certificates: list[Certificate] = [
        e.chain.to_certificate(e.epsilon) for e in profile.entries if e.chain is not None
    ]
    return results, certificates, 0


def _type_for(cfg: RunConfig, f: WeightedBipartiteStructure) -> TypeFunction:
    if cfg.row is not None:
        return TypeFunction.realized(f, f.row_index(cfg.row))
    if cfg.type_column is not None:
        return TypeFunction.external(f, read_type_column(cfg.type_column, f))
    raise EpslensError("define: give --row or --type-column")


def _define(cfg: RunConfig) -> Outcome:
    cfg.require("epsilon")
    assert cfg.epsilon is not None
    f = _matrix(cfg)
    p = _type_for(cfg, f)
    certificates: list[Certificate] = []
    results: dict[str, Any] = {"strategy": cfg.strategy.value}
    definition: Definition
    if cfg.strategy is DefinitionStrategy.MEDIAN:
        definition, error = build_definition(f, p, cfg.epsilon, strategy=DefinitionStrategy.MEDIAN)
    else:
        cfg.require("gamma", "delta")
        assert cfg.gamma is not None and cfg.delta is not None
        outcome = find_witness_rows(f, p, cfg.epsilon, cfg.gamma, cfg.delta)
        if isinstance(outcome, OracleFailure):
            raise EpslensError(outcome.message)
        if isinstance(outcome, InstabilityEvidence):
            results.update(
                outcome="instability",
                chain=outcome.chain.to_dict(),
                rounds=outcome.rounds,
            )
            certificates.append(outcome.chain.to_certificate(cfg.epsilon, strict=True))
            return results, certificates, 0
        certificates.append(outcome.to_certificate(f, p))
        definition = glue_definition(f, p, outcome)
        error = definition.sup_error
        results.update(witness_rows=[f.rows[a] for a in outcome.rows], bound=outcome.bound)
    document = definition.to_document(f, p)
    certificates.append(document)
    if cfg.definition_out is not None:
        write_definition(cfg.definition_out, document)
    results.update(
        outcome="definition",
        definition_id=derive_definition_id(document),
        rows=list(definition.row_labels),
        sup_error=error,
    )
    return results, certificates, 0


def _audit(cfg: RunConfig) -> Outcome:
    f = _matrix(cfg)
    g = _matrix(cfg, second=True) if cfg.matrix2 is not None else None
    k = cfg.k or 1
    report = seminorm_audit(f, g, k=k, scalars=cfg.scalars)
    fact = finite_stability_fact(f, k)
    results = {**report.to_dict(), "finite_stability": fact.to_dict()}
    certificates: list[Certificate] = []
    if g is not None:
        certificates.append(verify_ramsey(3).to_certificate())
    failed = not report.passed or fact.status is LawStatus.FAILED
    return results, certificates, 1 if failed else 0


def _m_definition(
    cfg: RunConfig, m: WeightedBipartiteStructure, values: np.ndarray, realized: int | None
) -> tuple[Definition, float]:
    assert cfg.epsilon is not None
    p = TypeFunction.realized(m, realized) if realized is not None else TypeFunction.external(m, values)
    if cfg.strategy is DefinitionStrategy.MEDIAN:
        return build_definition(m, p, cfg.epsilon, strategy=DefinitionStrategy.MEDIAN)
    return build_definition(m, p, cfg.epsilon, cfg.gamma, cfg.delta)


def _symmetry(cfg: RunConfig) -> Outcome:
    cfg.require("epsilon", "p_row", "q_col")
    assert cfg.epsilon is not None and cfg.p_row is not None and cfg.q_col is not None
    fx = _fixture(cfg)
    t = fx.table
    a, b = t.row_index(cfg.p_row), t.col_index(cfg.q_col)
    m = fx.m_structure
    rows, cols = list(fx.m_rows), list(fx.m_cols)
    psi_p, delta_p = _m_definition(
        cfg, m, t.data[a, cols], rows.index(a) if a in rows else None
    )
    mt = m.transpose()
    psi_q, delta_q = _m_definition(
        cfg, mt, t.data[rows, b], cols.index(b) if b in cols else None
    )
    report = symmetry_audit(fx, a, psi_p, delta_p, b, psi_q, delta_q, cfg.epsilon)
    inputs = {
        "p_row": cfg.p_row,
        "q_col": cfg.q_col,
        "psi_p": psi_p.to_document().model_dump(mode="json"),
        "psi_q": psi_q.to_document().model_dump(mode="json"),
        "delta_p": delta_p,
        "delta_q": delta_q,
        "epsilon": cfg.epsilon,
    }
    claimed = {"distance": report.distance, "bound_holds": report.bound_holds, "realized_in_m": report.realized_in_m}
    certificates: list[Certificate] = [measurement_certificate("symmetry", fx, inputs, claimed)]
    return report.to_dict(), certificates, 0


def _fs_level(cfg: RunConfig) -> Outcome:
    cfg.require("row")
    assert cfg.row is not None
    fx = _fixture(cfg)
    c = fx.table.row_index(cfg.row)
    level = fs_level(fx, c)
    results: dict[str, Any] = {"row": cfg.row, "level": level}
    certificates: list[Certificate] = [
        measurement_certificate("fs_level", fx, {"row": cfg.row}, {"level": level})
    ]
    if cfg.epsilon is not None and (cfg.strategy is DefinitionStrategy.MEDIAN or cfg.gamma is not None):
        m = fx.m_structure
        cols = list(fx.m_cols)
        rows = list(fx.m_rows)
        definition, error = _m_definition(cfg, m, fx.table.data[c, cols], rows.index(c) if c in rows else None)
        report = extension_audit(fx, definition, c, level, error)
        results["extension"] = report.to_dict()
        inputs = {
            "row": cfg.row,
            "definition": definition.to_document().model_dump(mode="json"),
            "delta": level,
            "epsilon": error,
        }
        claimed = {"m_error": report.m_error, "n_error": report.n_error, "bound_holds": report.bound_holds}
        certificates.append(measurement_certificate("extension", fx, inputs, claimed))
    return results, certificates, 0


def _cover(cfg: RunConfig) -> Outcome:
    cfg.require("epsilon")
    assert cfg.epsilon is not None
    f = _matrix(cfg)
    cover = cover_rows(f, cfg.epsilon, cfg.cover_method)
    results = {
        "method": cover.method.value,
        "parts": cover.labels(f),
        "count": cover.size,
        "diameters": list(cover.diameters),
        "optimal": cover.method is CoverMethod.EXACT,
    }
    return results, [cover.to_certificate(f)], 0


def _cb(cfg: RunConfig) -> Outcome:
    cfg.require("epsilon")
    assert cfg.epsilon is not None
    if cfg.space is not None:
        space = TopometricSpace.from_document(read_topometric(cfg.space), force=cfg.force)
        report = cb_analyze(space, cfg.epsilon)
    else:
        cfg.require("radius")
        assert cfg.radius is not None
        space, report = row_space_cb(_matrix(cfg), cfg.epsilon, cfg.radius)
    return report.to_dict(space), [report.to_certificate(space)], 0


def _eval(cfg: RunConfig) -> Outcome:
    cfg.require("structure", "formula")
    assert cfg.structure is not None and cfg.formula is not None
    structure = FiniteStructure.from_document(read_structure(cfg.structure))
    formula = parse_formula(cfg.formula, structure.language)
    f = materialize_matrix(formula, structure, cfg.x_vars, cfg.y_vars)
    diameter = diam_structure(formula, structure)
    values = [f.encoded(a, b) for a in range(f.shape[0]) for b in range(f.shape[1])]
    results: dict[str, Any] = {
        "formula": str(formula),
        "rows": list(f.rows),
        "cols": list(f.cols),
        "values": [[f.encoded(a, b) for b in range(f.shape[1])] for a in range(f.shape[0])],
        "envelope": formula.envelope.to_spans(),
        "diameter": diameter,
    }
    certificates: list[Certificate] = [
        MeasurementCertificate(
            name="diameter",
            space=f.space.to_document(),
            inputs={"formula": str(formula), "values": values},
            claimed={"diameter": diameter},
        )
    ]
    if cfg.k_max is not None:
        profile = stability_profile(f, cfg.k_max, mode=cfg.mode)
        results["profile"] = profile.as_dict()
        certificates.extend(e.chain.to_certificate(e.epsilon) for e in profile.entries if e.chain is not None)
    return results, certificates, 0


def _embed(cfg: RunConfig) -> Outcome:
    cfg.require("metric")
    assert cfg.metric is not None
    space = read_metric_csv(cfg.metric)
    images = embed_finite_metric(space, cfg.base)
    distortion = embedding_distortion(space, images)
    coords = encode_values(ValueSpace.sup_vector(space.size), images).tolist()
    results = {"base": cfg.base, "images": coords, "distortion": distortion}
    cert = EmbeddingCertificate(metric=[list(row) for row in space.table], base=cfg.base, images=coords)
    return results, [cert], 0


def _verify(cfg: RunConfig) -> Outcome:
    cfg.require("report")
    assert cfg.report is not None
    report = read_report(cfg.report)
    checks = verify_report(report)
    digest = payload_digest(report.results, report.certificates)
    results = {
        "checked": len(checks),
        "passed": sum(c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
        "digest_matches": digest == report.payload_digest,
    }
    ok = all(c.passed for c in checks) and results["digest_matches"]
    return results, [], 0 if ok else 1


_DISPATCH: dict[Command, Callable[[RunConfig], Outcome]] = {
    Command.DETECT: _detect,
    Command.PROFILE: _profile,
    Command.DEFINE: _define,
    Command.AUDIT_SEMINORM: _audit,
    Command.SYMMETRY: _symmetry,
    Command.FS_LEVEL: _fs_level,
    Command.COVER: _cover,
    Command.CB: _cb,
    Command.EVAL: _eval,
    Command.EMBED: _embed,
    Command.VERIFY: _verify,
}


def execute_command(cfg: RunConfig) -> tuple[Report, int]:
    """Run one command; domain errors propagate as ``EpslensError``."""
    started = time.perf_counter()
    results, certificates, code = _DISPATCH[cfg.command](cfg)
    report = Report(
        command=cfg.command,
        config=cfg.model_dump(mode="json", exclude_none=True),
        results=results,
        certificates=certificates,
        tool_version=__version__,
    )
    report.payload_digest = payload_digest(report.results, report.certificates)
    report.timing_s = time.perf_counter() - started
    return report, code


# ------------------------------------------------------------------------------
# argparse
# ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epslens", description="Finite-scale epsilon-stability tooling for metric-valued tables."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=[c.value for c in Command], help="Command to run")
    parser.add_argument("--matrix", help="Table CSV")
    parser.add_argument("--matrix2", help="Second table CSV (subadditivity audit)")
    parser.add_argument("--metric", help="Finite metric CSV: value space for index tables, or the input of embed")
    parser.add_argument("--type-column", help="External type CSV keyed by column label")
    parser.add_argument("--row", help="Row label: realized type (define) or tested row (fs-level)")
    parser.add_argument("--structure", help="Finite structure JSON")
    parser.add_argument("--formula", help="Formula text")
    parser.add_argument("--x", dest="x_vars", default="", help="Comma-separated row variables")
    parser.add_argument("--y", dest="y_vars", default="", help="Comma-separated column variables")
    parser.add_argument("--space", help="Topometric space JSON")
    parser.add_argument("--fixture", help="Two-layer fixture JSON")
    parser.add_argument("--report", help="Report JSON to verify")
    parser.add_argument("--p-row", help="Row label realizing p (symmetry)")
    parser.add_argument("--q-col", help="Column label realizing q (symmetry)")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--kmax", dest="k_max", type=int)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--radius", type=float, help="Basic-open radius for row-space CB analysis")
    parser.add_argument("--base", type=int, default=0, help="Base point index for embed")
    parser.add_argument("--bi-constant", action="store_true")
    parser.add_argument("--mode", choices=[m.value for m in SearchMode], default=SearchMode.EXACT.value)
    parser.add_argument(
        "--strategy", choices=[s.value for s in DefinitionStrategy], default=DefinitionStrategy.GLUE.value
    )
    parser.add_argument("--cover-method", choices=[m.value for m in CoverMethod], default=CoverMethod.EXACT.value)
    parser.add_argument("--scalars", default="0.5,2,-1", help="Comma-separated homogeneity scalars")
    parser.add_argument("--force", action="store_true", help="Accept the discrete topology default")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", help="Report JSON path (default: stdout)")
    parser.add_argument("--profile-csv", help="Also write the profile as CSV")
    parser.add_argument("--definition-out", help="Also write the definition JSON")
    parser.add_argument("--log-level", default=None, help="Logging level (default from EPSLENS_LOG_LEVEL)")
    return parser


def _split(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw = {
        key: value
        for key, value in vars(args).items()
        if key not in {"log_level", "x_vars", "y_vars", "scalars"} and value is not None
    }
    raw["x_vars"] = _split(args.x_vars)
    raw["y_vars"] = _split(args.y_vars)
    raw["scalars"] = [float(v) for v in _split(args.scalars)]
    return RunConfig.model_validate(raw)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (args.log_level or get_settings().log_level).upper()
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
    except (ValidationError, ValueError) as exc:
        print(f"epslens: invalid parameters: {exc}", file=sys.stderr)
        return 1
    try:
        report, code = execute_command(cfg)
    except SizeGuardExceeded as exc:
        print(f"epslens: refused: {exc}", file=sys.stderr)
        return 2
    except EpslensError as exc:
        print(f"epslens: {exc}", file=sys.stderr)
        return 1
    if cfg.output is not None:
        write_json(cfg.output, report)
    else:
        print(json.dumps(report.model_dump(mode="json"), indent=2))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
