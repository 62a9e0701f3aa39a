import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdsv.archshapes import ShapeReport, ShapeRow, conv_out, resnet_shapes, tdnn_shapes

TDNN_SYMBOLIC = {
    "clp_embedding": {
        "Input": "64 × T",
        "Frame1": "512 × T", "Frame2": "512 × T", "Frame3": "512 × T",
        "Frame4": "512 × T", "Frame5": "1536 × T",
        "Pooling": "(1536 × 29) × 1", "Segment1": "(20 × 29) × 1",
        "Segment2": "512 × 1", "Softmax": "N × 1",
    },
    "phrase_classifier": {
        "Input": "64 × T",
        "Frame1": "1536 × T", "Frame2": "512 × T", "Frame3": "512 × T",
        "Frame4": "256 × T", "Frame5": "256 × T",
        "Pooling": "(256 × 29) × 1", "Segment1": "(20 × 29) × 1",
        "Segment2": "512 × 1", "Softmax": "M × 1",
    },
}

RESNET_SYMBOLIC = {
    "Input": "257 × T × 1",
    "Conv1": "129 × T/2 × 16",
    "Conv1-pool": "65 × T/4 × 16",
    "Conv2": "65 × T/4 × 16",
    "Conv3": "33 × T/8 × 32",
    "Conv4": "17 × T/16 × 64",
    "Conv5": "9 × T/32 × 128",
    "FC": "1 × T/32 × 512",
}

RESNET_256 = {
    "Input": (257, 256, 1),
    "Conv1": (129, 128, 16),
    "Conv1-pool": (65, 64, 16),
    "Conv2": (65, 64, 16),
    "Conv3": (33, 32, 32),
    "Conv4": (17, 16, 64),
    "Conv5": (9, 8, 128),
    "FC": (1, 8, 512),
}


def test_conv_out():
    assert conv_out(257, 7, 2, 3) == 129
    assert conv_out(129, 3, 2, 1) == 65
    assert conv_out(10, 3, 1, 0, dilation=2) == 6


@pytest.mark.parametrize("variant", sorted(TDNN_SYMBOLIC))
def test_tdnn_symbolic(variant):
    rep = tdnn_shapes(256, variant, 1000 if variant == "clp_embedding" else None)
    assert {r.name: r.symbolic for r in rep.rows} == TDNN_SYMBOLIC[variant]


def test_tdnn_clp_embedding_dims():
    rep = tdnn_shapes(100, "clp_embedding", n_classes=500)
    assert rep["Pooling"].dims == (1536, 29, 1)
    assert rep["Segment1"].dims == (20, 29, 1)
    assert rep["Segment2"].dims == (512, 1)
    assert rep["Softmax"].dims == (500, 1)
    assert [rep[f"Frame{i}"].dims[0] for i in range(1, 6)] == [512, 512, 512, 512, 1536]


def test_tdnn_phrase_classifier_dims():
    rep = tdnn_shapes(256, "phrase_classifier")
    assert rep["Softmax"].dims == (10, 1)
    assert rep["Pooling"].dims == (256, 29, 1)
    assert [rep[f"Frame{i}"].dims[0] for i in range(1, 6)] == [1536, 512, 512, 256, 256]


def test_tdnn_frame_lengths_at_256():
    rep = tdnn_shapes(256, "clp_embedding", 10)
    assert [rep[f"Frame{i}"].dims[1] for i in range(1, 6)] == [126, 122, 116, 116, 116]


def test_tdnn_errors():
    with pytest.raises(ValueError):
        tdnn_shapes(1, "phrase_classifier")
    with pytest.raises(ValueError):
        tdnn_shapes(100, "clp_embedding")
    with pytest.raises(ValueError):
        tdnn_shapes(100, "unknown", 3)


def test_resnet_symbolic():
    assert {r.name: r.symbolic for r in resnet_shapes(256).rows} == RESNET_SYMBOLIC


def test_resnet_256():
    assert {r.name: r.dims for r in resnet_shapes(256).rows} == RESNET_256


def test_resnet_too_short():
    with pytest.raises(ValueError):
        resnet_shapes(16)


@given(st.integers(32, 4000))
def test_resnet_time_axis_follows_stride(T):
    rep = resnet_shapes(T)
    for name, stride in (("Conv1", 2), ("Conv1-pool", 4), ("Conv3", 8), ("Conv4", 16), ("Conv5", 32)):
        assert rep[name].dims[1] == -(-T // stride)
    assert tuple(r.dims[0] for r in rep.rows) == (257, 129, 65, 65, 33, 17, 9, 1)


def test_report_rendering():
    rep = resnet_shapes(64)
    assert rep.as_key_values().splitlines()[-1] == "FC=1x2x512"
    assert "Conv5" in rep.as_table()
    with pytest.raises(KeyError):
        rep["missing"]
    with pytest.raises(ValueError):
        ShapeReport((ShapeRow("x", (0,), "0"),))
