from __future__ import annotations

import numpy as np
import pytest

from epslens.certificates import verify_certificate, verify_report
from epslens.contracts import (
    Command,
    DefinitionStrategy,
    EmbeddingCertificate,
    MeasurementCertificate,
    Report,
)
from epslens.definability import TypeFunction, build_definition, find_witness_rows
from epslens.ramsey import verify_ramsey
from epslens.stability import WeightedBipartiteStructure, detect_chain, half_graph
from epslens.topometric import TopometricSpace, cb_analyze
from epslens.typespace import TwoLayerFixture, cover_rows, measurement_certificate
from epslens.value_space import ValueSpace, embed_finite_metric, encode_values

PATH3 = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]


def test_plain_chain_certificate(h3: WeightedBipartiteStructure) -> None:
    chain = detect_chain(h3, 1.0, 2).chain
    assert chain is not None
    cert = chain.to_certificate(1.0)
    assert verify_certificate(cert).passed
    assert not verify_certificate(cert.model_copy(update={"epsilon": 1.5})).passed
    assert not verify_certificate(cert.model_copy(update={"strict": True})).passed
    repeated = cert.model_copy(update={"row_labels": ["a0", "a0", "a0"], "col_labels": ["b0", "b0", "b0"]})
    assert verify_certificate(repeated).reason == "chain pairs are not distinct"


def test_bi_constant_chain_certificate(h3: WeightedBipartiteStructure) -> None:
    chain = detect_chain(h3, 1.0, 2, bi_constant=True, delta=0.0).chain
    assert chain is not None
    cert = chain.to_certificate(1.0)
    assert verify_certificate(cert).passed
    swapped = cert.model_copy(update={"r": cert.s, "s": cert.r})
    assert not verify_certificate(swapped).passed
    assert not verify_certificate(cert.model_copy(update={"delta": None})).passed


def test_ramsey_certificate() -> None:
    cert = verify_ramsey(3).to_certificate()
    assert verify_certificate(cert).passed
    triangle = cert.model_copy(update={"lower_bound_red_edges": [(0, 1), (1, 2), (0, 2)]})
    assert not verify_certificate(triangle).passed
    assert verify_certificate(verify_ramsey(4).to_certificate()).passed


def test_witness_set_and_glue_definition_certificates() -> None:
    f = half_graph(4)
    p = TypeFunction.realized(f, 2)
    witness = find_witness_rows(f, p, 0.25, 0.2, 0.1)
    cert = witness.to_certificate(f, p)  # type: ignore[union-attr]
    assert verify_certificate(cert).passed
    assert not verify_certificate(cert.model_copy(update={"row_values": []})).passed

    definition, _ = build_definition(f, p, 0.25, 0.2, 0.1)
    doc = definition.to_document(f, p)
    assert verify_certificate(doc).passed
    wrong = doc.model_copy(update={"type_values": [[0.0]] * 4})
    check = verify_certificate(wrong)
    assert not check.passed
    assert "exceeds" in check.reason


def test_median_definition_certificate(h3: WeightedBipartiteStructure) -> None:
    p = TypeFunction.external(h3, np.full(3, 0.5))
    definition, _ = build_definition(h3, p, 0.5, strategy=DefinitionStrategy.MEDIAN)
    doc = definition.to_document(h3, p)
    assert verify_certificate(doc).passed
    assert not verify_certificate(doc.model_copy(update={"epsilon": 0.1})).passed
    assert not verify_certificate(doc.model_copy(update={"column_inputs": []})).passed


def test_median_certificate_checks_every_claimed_field(h3: WeightedBipartiteStructure) -> None:
    p = TypeFunction.external(h3, np.full(3, 0.5))
    definition, _ = build_definition(h3, p, 0.5, strategy=DefinitionStrategy.MEDIAN)
    doc = definition.to_document(h3, p)
    assert doc.sup_error == 0.5
    understated = verify_certificate(doc.model_copy(update={"sup_error": 0.0}))
    assert not understated.passed
    assert "claimed" in understated.reason
    even = doc.model_copy(update={"row_labels": ["a0", "a1"], "column_inputs": [[1.0, 0.0]] * 3})
    assert "middle value" in verify_certificate(even).reason
    wide = doc.model_copy(update={"column_inputs": [[1.0, 1.0, 1.0]] * 3})
    assert verify_certificate(wide).reason == "column inputs do not match the rows"
    short = doc.model_copy(update={"type_values": [0.5]})
    assert not verify_certificate(short).passed


def test_glue_certificate_needs_embedded_columns() -> None:
    f = half_graph(4)
    p = TypeFunction.realized(f, 2)
    definition, _ = build_definition(f, p, 0.25, 0.2, 0.1)
    doc = definition.to_document(f, p)
    empty = verify_certificate(doc.model_copy(update={"column_inputs": [], "type_values": []}))
    assert empty.reason == "no embedded columns"
    short = verify_certificate(doc.model_copy(update={"type_values": doc.type_values[:2]}))
    assert not short.passed


def test_cover_certificate() -> None:
    f = WeightedBipartiteStructure.from_array([[0.0], [3.0], [6.0], [9.0]])
    cert = cover_rows(f, 1.5).to_certificate(f)
    assert verify_certificate(cert).passed
    merged = cert.model_copy(update={"parts": [["a0", "a1", "a2", "a3"]]})
    assert "diameter" in verify_certificate(merged).reason
    missing = cert.model_copy(update={"parts": [["a0", "a1"]]})
    assert verify_certificate(missing).reason == "parts do not partition the rows"


def test_cb_certificate() -> None:
    metric = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0)))
    space = TopometricSpace.build(["p0", "p1", "p2", "p3"], metric, [0b0001, 0b0011, 0b0111])
    cert = cb_analyze(space, 0.5).to_certificate(space)
    assert verify_certificate(cert).passed
    wrong = cert.model_copy(update={"ranks": {"p0": 0, "p1": 0, "p2": 0, "p3": 0}})
    assert verify_certificate(wrong).reason == "recomputed levels or ranks differ"


def test_embedding_certificate() -> None:
    space = ValueSpace.finite_metric(PATH3)
    images = encode_values(ValueSpace.sup_vector(3), embed_finite_metric(space, 0)).tolist()
    cert = EmbeddingCertificate(metric=PATH3, base=0, images=images)
    assert verify_certificate(cert).passed
    squashed = cert.model_copy(update={"images": [[0.0, 0.0, 0.0]] * 3})
    assert not verify_certificate(squashed).passed
    short = cert.model_copy(update={"images": images[:2]})
    assert verify_certificate(short).reason == "image count does not match the metric"


def test_measurement_certificates() -> None:
    table = WeightedBipartiteStructure.from_array([[0.0, 0.0], [1.0, 1.0], [0.2, 0.1]])
    fx = TwoLayerFixture(table=table, m_rows=(0, 1), m_cols=(0,))
    cert = measurement_certificate("fs_level", fx, {"row": "a2"}, {"level": 0.2})
    assert verify_certificate(cert).passed
    assert not verify_certificate(cert.model_copy(update={"claimed": {"level": 0.3}})).passed

    diameter = MeasurementCertificate(
        name="diameter",
        space=ValueSpace.real().to_document(),
        inputs={"values": [[0.0], [0.25], [1.0]]},
        claimed={"diameter": 1.0},
    )
    assert verify_certificate(diameter).passed
    assert not verify_certificate(diameter.model_copy(update={"claimed": {"diameter": 0.5}})).passed


def test_unreadable_certificate_data_fails_instead_of_raising() -> None:
    table = half_graph(2)
    fx = TwoLayerFixture(table=table, m_rows=(0,), m_cols=(0,))
    cert = measurement_certificate("fs_level", fx, {"row": "nowhere"}, {"level": 0.0})
    check = verify_certificate(cert)
    assert not check.passed
    assert check.reason.startswith("certificate data rejected")


@pytest.mark.parametrize("tamper", [False, True])
def test_verify_report_collects_every_check(h3: WeightedBipartiteStructure, tamper: bool) -> None:
    chain = detect_chain(h3, 1.0, 1).chain
    assert chain is not None
    cert = chain.to_certificate(1.0)
    if tamper:
        cert = cert.model_copy(update={"epsilon": 2.0})
    report = Report(command=Command.DETECT, certificates=[cert, verify_ramsey(3).to_certificate()])
    checks = verify_report(report)
    assert [c.kind for c in checks] == ["chain", "ramsey"]
    assert [c.passed for c in checks] == [not tamper, True]
