import pytest

from rtop.errors import NonMonotonicTickError
from rtop.nodes import NodeId, NodeType
from rtop.trace import ObservationTrace, TraceEntry


def img(n: int) -> NodeId:
    return NodeId(NodeType.IMAGE, n)


JMP = NodeId(NodeType.JUMP, 1)


def make_trace(**kwargs) -> ObservationTrace:
    kwargs.setdefault("jump_node", lambda: JMP)
    return ObservationTrace(**kwargs)


def fill(trace: ObservationTrace, count: int, p_net=None, start_tick: int = 1):
    for i in range(count):
        p = p_net[i] if p_net is not None else 0.0
        trace.append(TraceEntry(img(i + 1), start_tick + i, p))


class TestAppend:
    def test_short_trace_emits_nothing(self):
        trace = make_trace()
        fill(trace, 3)
        assert len(trace) == 3
        assert trace.drain_paths() == []

    def test_non_monotonic_tick(self):
        trace = make_trace()
        trace.append(TraceEntry(img(1), 5, 0.0))
        with pytest.raises(NonMonotonicTickError):
            trace.append(TraceEntry(img(2), 5, 0.0))

    def test_sixteenth_entry_emits_first_window(self):
        trace = make_trace(jump_enabled=False)
        fill(trace, 15)
        assert trace.drain_paths() == []
        trace.append(TraceEntry(img(16), 16, 0.0))
        paths = trace.drain_paths()
        assert len(paths) == 1
        assert paths[0].origin == 0
        assert paths[0].nodes == [img(i + 1) for i in range(16)]


class TestWindowing:
    def test_stride_offsets(self):
        trace = make_trace(jump_enabled=False)
        fill(trace, 24)
        origins = [p.origin for p in trace.drain_paths()]
        assert origins == [0, 4, 8]  # offsets 12+ lack 16 successors

    def test_deltas_are_p_net_differences(self):
        trace = make_trace(jump_enabled=False)
        p = [float(i * i) for i in range(16)]
        fill(trace, 16, p_net=p)
        (path,) = trace.drain_paths()
        assert path.deltas == [p[i + 1] - p[i] for i in range(15)]


class TestJumpPaths:
    def test_thirteen_node_form(self):
        trace = make_trace(path_length=32)  # keep direct windows out of the way
        fill(trace, 13)
        paths = [p for p in trace.flush_jump_tails() if p.kind == "jump"]
        assert len(paths) == 1
        assert paths[0].nodes == [img(1), JMP, img(7), JMP, img(13)]

    def test_six_nodes_no_jump(self):
        trace = make_trace(path_length=32)
        fill(trace, 6)
        assert [p for p in trace.flush_jump_tails() if p.kind == "jump"] == []

    def test_25_node_anchors(self):
        trace = make_trace(path_length=32)
        fill(trace, 25)
        eager = [p for p in trace.drain_paths() if p.kind == "jump"]
        assert [p.origin for p in eager] == [0]  # full five-raw horizon fits
        tails = [p for p in trace.flush_jump_tails() if p.kind == "jump"]
        assert [p.origin for p in eager + tails] == [0, 4, 8, 12]

    def test_five_raw_node_cap(self):
        trace = make_trace(path_length=64)
        fill(trace, 40)
        first = [p for p in trace.drain_paths() if p.kind == "jump"][0]
        raw = [n for n in first.nodes if n != JMP]
        assert raw == [img(1), img(7), img(13), img(19), img(25)]

    def test_action_anchor_skipped(self):
        trace = make_trace(path_length=32)
        trace.append(TraceEntry(NodeId(NodeType.SPEECH, 1), 1, 0.0))
        for i in range(2, 14):
            trace.append(TraceEntry(img(i), i, 0.0))
        assert [p for p in trace.flush_jump_tails() if p.kind == "jump"] == []

    def test_jump_deltas_split_at_jump_node(self):
        trace = make_trace(path_length=32)
        p = [float(i) for i in range(13)]
        fill(trace, 13, p_net=p)
        (jump,) = [p for p in trace.flush_jump_tails() if p.kind == "jump"]
        # edge into JMP carries nothing; edge out carries the hop's change
        assert jump.deltas == [0.0, 6.0, 0.0, 6.0]

    def test_disabled(self):
        trace = make_trace(path_length=32, jump_enabled=False)
        fill(trace, 25)
        assert [p for p in trace.drain_paths() if p.kind == "jump"] == []
        assert trace.flush_jump_tails() == []


class TestClear:
    def test_clear_empties_and_realigns(self):
        trace = make_trace(jump_enabled=False)
        fill(trace, 18)
        trace.drain_paths()
        trace.clear()
        assert len(trace) == 0
        fill(trace, 16, start_tick=100)
        paths = trace.drain_paths()
        assert [p.origin for p in paths] == [0]

    def test_export_lines(self):
        trace = make_trace()
        trace.append(TraceEntry(img(158), 37, -2.5))
        assert trace.export_lines() == ["37 IMG.158 p_net=-2.5"]
