import numpy as np
import pytest

from conftest import raster_of
from rtop.config import SessionConfig
from rtop.environment import (
    StimulusLibrary,
    World,
    load_wav,
    parse_script,
    synth_audio,
    synth_image,
)
from rtop.errors import ScriptError
from rtop.nodes import SpeechAction
from rtop.percepts import AUDIO_RATE, AUDIO_SAMPLES
from rtop.session import run_session


def library():
    lib = StimulusLibrary()
    lib.add_image("wheel", raster_of(192, side=64))
    lib.add_audio("WHEEL", synth_audio("sine:440:0.6"))
    lib.add_audio("RIGHT", synth_audio("sine:900:0.6"))
    return lib


class TestScriptParsing:
    def test_events_sorted_and_typed(self):
        script = parse_script(
            """
            # comment
            at=9 play_audio WHEEL repeat=2 dur=2 gap=1
            at=5 present_image wheel hold=8
            at=12 feed
            rule wheel comfort=1 reply=RIGHT
            rule_default comfort=-1
            run until=40
            """
        )
        assert [e.kind for e in script.events] == [
            "rule", "rule_default", "present_image", "play_audio", "feed",
        ]
        assert script.until == 40
        assert script.end_tick == 40

    def test_noise_argument(self):
        script = parse_script("at=1 present_image wheel hold=2 noise=3:17")
        (ev,) = script.events
        assert ev.args["noise_sigma"] == 3.0 and ev.args["noise_seed"] == 17

    def test_unknown_event(self):
        with pytest.raises(ScriptError):
            parse_script("at=1 explode now")

    def test_end_tick_without_run(self):
        script = parse_script("at=5 present_image wheel hold=8")
        assert script.end_tick == 14


class TestWorldChannels:
    def test_no_stimulus_blank_and_silent(self, config):
        world = World(parse_script(""), library(), config)
        img = world.visual_sample((0, 0, 64))
        assert (img.lightness == 0).all()
        assert (world.audio_sample(1).samples == 0).all()

    def test_presentation_hold(self, config):
        world = World(parse_script("at=1 present_image wheel hold=4"), library(), config)
        samples = []
        for tick in range(1, 8):
            world.apply_due(tick)
            samples.append(world.visual_sample((0, 0, 64)))
            world.end_tick(tick)
        lit = [bool((s.lightness == 6).all()) for s in samples]
        assert lit == [True, True, True, True, False, False, False]

    def test_audio_run_window(self, config):
        world = World(parse_script("at=2 play_audio WHEEL dur=2"), library(), config)
        heard = []
        for tick in range(1, 6):
            world.apply_due(tick)
            heard.append(bool(world.audio_sample(tick).samples.any()))
            world.end_tick(tick)
        assert heard == [False, True, True, False, False]

    def test_focus_clamping(self, config):
        world = World(parse_script("at=1 present_image wheel hold=2"), library(), config)
        world.apply_due(1)
        assert world.clamp_focus((200, -5, 32)) == (32, 0, 32)
        assert world.clamped_focus


class TestEcho:
    def _world(self, config, text):
        return World(parse_script(text), library(), config)

    def test_reward_rule_fires_next_tick(self, config):
        world = self._world(config, "rule wheel comfort=1")
        world.apply_due(1)
        world.echo_speech(SpeechAction(("w", "i", "l")), tick=5)
        assert world.apply_due(5) == []
        effects = world.apply_due(6)
        assert len(effects) == 1
        assert effects[0].args == {"kind": "comfort_delta", "amount": 1.0}

    def test_unlisted_word_no_response(self, config):
        world = self._world(config, "rule wheel comfort=1")
        world.apply_due(1)
        world.echo_speech(SpeechAction(("k", "A", "r")), tick=5)
        assert world.apply_due(6) == []

    def test_default_rule_covers_others(self, config):
        world = self._world(config, "rule wheel comfort=1\nrule_default comfort=-1")
        world.apply_due(1)
        world.echo_speech(SpeechAction(("k", "A", "r")), tick=5)
        effects = world.apply_due(6)
        assert effects[0].args["amount"] == -1.0

    def test_reply_token_scheduled(self, config):
        world = self._world(config, "rule car comfort=1 reply=RIGHT")
        world.apply_due(1)
        world.echo_speech(SpeechAction(("k", "A", "r")), tick=5)
        world.apply_due(6)
        assert world.audio_sample(6).samples.any()


class TestScheduleInSession:
    def test_presented_image_captured_each_tick(self, config):
        lib = library()
        result = run_session(config, "at=1 present_image wheel hold=4\nrun until=6", library=lib)
        captures = [e for e in result.events if e.kind == "node_captured" and e.data["source"] == "visual"]
        assert [c.data["label"] for c in captures] == ["IMG.1"] * 4 + ["IMG.2"] * 2
        assert sum(1 for c in captures if c.data["new"]) == 2  # held frames deduplicate

    def test_feed_resets_hunger_then_schedule_resumes(self):
        config = SessionConfig(seed=1, hunger_interval_ticks=40)
        result = run_session(config, "at=100 feed\nrun until=140", library=library())
        kb = result.kb
        # +1 at ticks 40 and 80, feed zeroed at 100, +1 again at 120
        assert kb.pp.levels["hunger"] == 1.0
        reward_events = [e for e in result.events if e.kind == "reward_applied"]
        assert reward_events[0].data["reward"] == "feed"
        assert reward_events[0].tick == 100


class TestSynth:
    def test_image_specs(self):
        flat = synth_image("flat:0,0,128:16")
        assert flat.shape == (16, 16, 3) and (flat[:, :, 2] == 128).all()
        assert np.array_equal(synth_image("noise:9"), synth_image("noise:9"))
        assert np.array_equal(synth_image("blocks:4"), synth_image("blocks:4"))

    def test_audio_specs(self):
        assert not synth_audio("silence").samples.any()
        assert np.array_equal(synth_audio("sine:440").samples, synth_audio("sine:440").samples)
        with pytest.raises(ScriptError):
            synth_audio("whistle:2")

    def test_wav_roundtrip(self):
        import io
        import wave

        tone = synth_audio("sine:440:0.5")
        buf = io.BytesIO()
        with wave.open(buf, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(1)
            fh.setframerate(AUDIO_RATE)
            fh.writeframes((tone.samples.astype(np.int16) + 128).astype(np.uint8).tobytes())
        loaded = load_wav(buf.getvalue())
        assert np.array_equal(loaded.samples, tone.samples)
