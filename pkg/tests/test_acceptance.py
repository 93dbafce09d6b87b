"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The end-to-end counting
criteria share a 40-scene synthetic suite (tests/scene_suite.py); the
12-antenna and 192-antenna runs of that suite are computed once per
session and reused.
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

import scene_suite
from breathcount import (
    FULL_PRESET,
    LOWRES_PRESET,
    PRESETS,
    Person,
    Scene,
    derived_resolutions,
)
from breathcount.attention import AttentionClassifier, ModelShape
from breathcount.breathing import MicroSource, filter_breathing, iterative_ica
from breathcount.cfar import CfarParams, ca_cfar_mask
from breathcount.counting import count_by_clustering
from breathcount.dsp import range_doppler_azimuth_fft, range_fft, velocity_axis
from breathcount.metrics import counting_errors, weighted_metrics
from breathcount.pipeline import PipelineConfig, count_frames
from breathcount.profiles import augment_profile, build_profile, rasterize_profile
from breathcount.simulate import iter_frames
from breathcount.training import TrainConfig, train_classifier
from cfar_reference import brute_force_cfar
from conftest import align_by_correlation


def report(criterion: str, passed: bool, detail: str):
    marker = "PASS" if passed else "FAIL"
    print(f"[{criterion}] {marker}: {detail}")
    assert passed, f"{criterion}: {detail}"


# -- shared end-to-end suite runs ------------------------------------------

# Pipeline used for the end-to-end suite at both presets. Everything is at
# its stock default; the breathing score is calibrated once for the
# synthetic environment (the reference procedure sets it empirically per
# environment), and it is identical for the two antenna configurations so
# the criterion-10 comparison stays fair.
SUITE_PIPELINE = dict(min_quality=0.2)


def _suite_pipeline(seed: int) -> PipelineConfig:
    return PipelineConfig(seed=seed, **SUITE_PIPELINE)


def _count_one(args):
    preset_name, truth, scene = args
    config = PRESETS[preset_name]
    result = count_frames(iter_frames(config, scene), config, _suite_pipeline(scene.seed))
    return truth, result.estimate.count


def _run_suite(preset_name: str):
    jobs = [(preset_name, truth, scene) for truth, scene in scene_suite.suite_scenes()]
    with ProcessPoolExecutor(max_workers=2) as pool:
        return list(pool.map(_count_one, jobs, chunksize=4))


@pytest.fixture(scope="module")
def lowres_suite():
    t0 = time.time()
    results = _run_suite("lowres")
    print(f"\n[suite] low-res run took {time.time() - t0:.0f}s")
    return results


@pytest.fixture(scope="module")
def full_suite():
    t0 = time.time()
    results = _run_suite("full")
    print(f"\n[suite] full-res run took {time.time() - t0:.0f}s")
    return results


def _accuracy(results):
    return float(np.mean([p == t for t, p in results]))


# -- criteria ----------------------------------------------------------------


def test_criterion_1_derived_resolutions():
    t0 = time.time()
    derived = derived_resolutions(FULL_PRESET)
    published = {
        "range_resolution": 42.1e-3,
        "max_range": 10.77,
        "velocity_resolution": 21.2e-3,
        "max_velocity": 1.36,
    }
    rels = {k: abs(derived[k] - v) / v for k, v in published.items()}
    ok = all(r < 5e-3 for r in rels.values()) and time.time() - t0 < 1.0
    report(
        "criterion 1",
        ok,
        "derived resolutions within 3 significant figures: "
        + ", ".join(f"{k} rel {r:.1e}" for k, r in rels.items()),
    )


def test_criterion_2_cfar_oracle_equivalence():
    t0 = time.time()
    params = CfarParams(guard_cells=1, training_cells=3, pfa=1e-2)
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(100):
        power_db = 10.0 * np.log10(rng.exponential(size=(32, 32)))
        if not np.array_equal(ca_cfar_mask(power_db, params), brute_force_cfar(power_db, params)):
            mismatches += 1
    elapsed = time.time() - t0
    report(
        "criterion 2",
        mismatches == 0 and elapsed < 10.0,
        f"fast CFAR == brute force on 100 random 32x32 maps ({elapsed:.1f}s)",
    )


def test_criterion_3_fft_parseval_and_argmax_oracles():
    t0 = time.time()
    cfg = LOWRES_PRESET
    rng = np.random.default_rng(3)
    worst_rel = 0.0
    for _ in range(5):
        frame = rng.standard_normal(
            (cfg.chirps_per_frame, cfg.virtual_antennas, cfg.adc_samples_per_chirp)
        ) + 1j * rng.standard_normal(
            (cfg.chirps_per_frame, cfg.virtual_antennas, cfg.adc_samples_per_chirp)
        )
        out = range_fft(frame, window="rect")
        p_in = float(np.sum(np.abs(frame) ** 2))
        p_out = float(np.sum(np.abs(out) ** 2))
        worst_rel = max(worst_rel, abs(p_out - p_in) / p_in)

    # geometry oracles: injected (range, velocity, azimuth) must land on
    # the predicted bins within +/-1
    k = np.arange(cfg.chirps_per_frame)
    a = np.arange(cfg.virtual_antennas)
    s = np.arange(cfg.adc_samples_per_chirp)
    zero_bin = int(np.argmin(np.abs(velocity_axis(cfg))))
    bin_errors = []
    for r, v, sin_az in ((2.1, 0.22, 0.3), (4.4, -0.55, -0.5), (1.3, 0.07, 0.05)):
        r_k = r + v * (k + 0.5) * cfg.chirp_time
        frame = np.einsum(
            "k,a,s->kas",
            np.exp(-1j * 4 * np.pi / cfg.wavelength * r_k),
            np.exp(1j * np.pi * a * sin_az),
            np.exp(1j * 2 * np.pi * (r / cfg.range_resolution) * s / s.size),
        )
        spectra = range_doppler_azimuth_fft(frame, cfg)
        rb, ab = np.unravel_index(
            np.argmax(spectra.range_azimuth_db), spectra.range_azimuth_db.shape
        )
        cell = np.abs(spectra.doppler_cube[:, ab, rb])
        vb = int(np.argmax(cell)) - zero_bin
        n_az = cfg.azimuth_fft_size
        bin_errors.append(abs(rb - round(r / cfg.range_resolution)))
        bin_errors.append(abs(vb - round(v / cfg.velocity_resolution)))
        bin_errors.append(abs(ab - (n_az // 2 + round(n_az * sin_az / 2))))
    elapsed = time.time() - t0
    report(
        "criterion 3",
        worst_rel < 1e-6 and max(bin_errors) <= 1 and elapsed < 30.0,
        f"Parseval rel {worst_rel:.1e}, max bin error {max(bin_errors)} ({elapsed:.1f}s)",
    )


def test_criterion_4_ica_recovery():
    t0 = time.time()
    worst = 1.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        t = np.arange(60) / 2.0
        for freqs in ((0.2, 0.35), (0.2, 0.35, 0.5)):
            truth = np.stack(
                [np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) for f in freqs]
            )
            mixing = rng.normal(size=(10, len(freqs)))
            x = mixing @ truth
            x += 0.05 * x.std() * rng.normal(size=x.shape)
            sources = iterative_ica(x, n=len(freqs), seed=seed, rank_floor=1e-10)
            exact = [s for s in sources if s.ica_iteration == len(freqs)]
            corr = align_by_correlation(np.stack([s.signal for s in exact]), truth)
            worst = min(worst, float(corr.min()))
    elapsed = time.time() - t0
    report(
        "criterion 4",
        worst >= 0.95 and elapsed < 60.0,
        f"2- and 3-source recovery over 20 seeds, worst aligned |corr| {worst:.3f} ({elapsed:.1f}s)",
    )


def test_criterion_5_breathing_filter_suite():
    t0 = time.time()
    frame_rate = 2.0
    n = 60
    t = np.arange(n) / frame_rate

    def tone(freq):
        return np.sin(2 * np.pi * freq * t)

    cases = []
    # in-band, high quality: exact-bin tones
    for freq_bin in (4, 7, 12, 17):
        cases.append((tone(freq_bin * frame_rate / n), True))
    # in-band mean frequency but flat spectrum (low quality)
    impulse = np.zeros(n)
    impulse[0] = 1.0
    cases.append((impulse, False))
    rng = np.random.default_rng(5)
    flat = np.fft.irfft(np.exp(1j * rng.uniform(0, 2 * np.pi, n // 2 + 1)), n)
    cases.append((flat, False))
    # out of band
    cases.append((tone(0.8), False))
    cases.append((tone(0.05), False))

    correct = 0
    for signal, expect_keep in cases:
        src = MicroSource(signal=signal, mixing_weights=np.ones(2), ica_iteration=1)
        kept = filter_breathing([src], frame_rate)
        correct += (len(kept) == 1) == expect_keep
    elapsed = time.time() - t0
    report(
        "criterion 5",
        correct == len(cases) and elapsed < 5.0,
        f"{correct}/{len(cases)} accept/reject decisions correct at defaults "
        f"(0.1 Hz, 0.6 Hz, 0.2) ({elapsed:.1f}s)",
    )


def test_criterion_6_metric_formulas():
    t0 = time.time()
    per_class = {2: (0.8, 0.8), 3: (0.6, 0.6), 5: (0.9, 0.9), 7: (0.7, 0.7)}
    out = weighted_metrics(per_class)
    oracle = 0.88 * 210.0 / 247.0   # hand arithmetic, = 0.7482...
    ok = abs(out["precision"] - oracle) < 1e-9

    errors = counting_errors([2, 3], [3, 3])
    ok &= errors == {"mae": 0.5, "mse": 0.5}
    ok &= counting_errors([7, 7], [2, 2]) == {"mae": 5.0, "mse": 25.0}

    equal = weighted_metrics(per_class, {c: 1.0 for c in per_class})
    macro_p = float(np.mean([p for p, _ in per_class.values()]))
    ok &= abs(equal["precision"] - macro_p) < 1e-12
    elapsed = time.time() - t0
    report(
        "criterion 6",
        ok and elapsed < 1.0,
        f"weighted metrics match hand oracles to 1e-9 (P_w {out['precision']:.6f} "
        f"vs {oracle:.6f}); MAE/MSE definitional ({elapsed:.2f}s)",
    )


def test_criterion_7_end_to_end_counting(lowres_suite):
    scenes = scene_suite.suite_scenes()
    # suite constraint audit: class balance, spacing spans, SNR
    per_class = {c: 0 for c in scene_suite.CLASSES}
    for truth, scene in scenes:
        per_class[truth] += 1
        assert scene_suite.weakest_person_snr_db(scene) >= 10.0
        for i, a in enumerate(scene.persons):
            for b in scene.persons[i + 1 :]:
                dy, dx = abs(a.y - b.y), abs(a.x - b.x)
                assert dy >= 0.149 or dx >= 0.85, "persons closer than suite spec"
        rates = [p.breathing_hz for p in scene.persons]
        assert len(set(round(r, 4) for r in rates)) == len(rates)
    assert all(v == 10 for v in per_class.values())

    acc = _accuracy(lowres_suite)
    errors = counting_errors([p for _, p in lowres_suite], [t for t, _ in lowres_suite])
    ok = acc >= 0.80 and errors["mae"] <= 0.30
    report(
        "criterion 7",
        ok,
        f"40-scene suite at low-res: exact accuracy {acc:.1%} (need >= 80%), "
        f"MAE {errors['mae']:.3f} (need <= 0.3)",
    )


def test_criterion_8_toy_classifier(lowres_suite):
    # (a) head gradient check against central finite differences
    t0 = time.time()
    shape = ModelShape()
    model = AttentionClassifier(shape=shape, seed=0)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(4, 32, 32))
    y = np.array([2, 3, 5, 7])
    _, grads = model.loss_and_grads(x, y)
    worst_rel = 0.0
    for name in ("head.w", "head.b"):
        flat = model.params[name].reshape(-1)
        analytic = grads[name].reshape(-1)
        for idx in range(flat.size):
            eps = 1e-6
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = model.loss_and_grads(x, y)
            flat[idx] = orig - eps
            lm, _ = model.loss_and_grads(x, y)
            flat[idx] = orig
            numeric = (lp - lm) / (2 * eps)
            worst_rel = max(worst_rel, abs(analytic[idx] - numeric) / max(abs(numeric), 1e-8))
    grad_ok = worst_rel <= 1e-4

    # (b) train on simulator profiles, validate on held-out scenes
    t_train = time.time()
    train, valid, two_person_profiles = _classifier_dataset()
    model, history = train_classifier(
        train, valid, TrainConfig(epochs=60, learning_rate=0.02, seed=0)
    )
    train_elapsed = time.time() - t_train
    f1_ok = history.best_f1 >= 0.8 and train_elapsed < 600.0

    # in-distribution 2-person profiles classify as 2 with solid vote margins
    from breathcount.counting import count_by_classifier

    votes_ok = True
    for profile in two_person_profiles:
        estimate = count_by_classifier(profile, model, seed=1)
        votes_ok &= estimate.count == 2 and estimate.confidence >= 0.6

    # (c) augmentation invariance of clustering over 50 seeds
    profile = _reference_profile()
    baseline = count_by_clustering(profile).count
    invariant = all(
        count_by_clustering(augment_profile(profile, seed)).count == baseline
        for seed in range(50)
    )
    report(
        "criterion 8",
        grad_ok and f1_ok and votes_ok and invariant,
        f"head gradient rel err {worst_rel:.1e} (<=1e-4); validation macro F1 "
        f"{history.best_f1:.3f} after {train_elapsed:.0f}s training (>=0.8, <10min); "
        f"held-out 2-person profiles voted 2 with confidence >= 0.6: {votes_ok}; "
        f"clustering augmentation-invariant over 50 seeds: {invariant}",
    )


def _scene_profile(count, variant, preset=LOWRES_PRESET):
    from breathcount.pipeline import extract_breathing, process_frames

    scene = scene_suite.make_scene(count, variant)
    pipeline = _suite_pipeline(scene.seed)
    result = process_frames(iter_frames(preset, scene), preset, pipeline)
    valid, _, breathing = extract_breathing(result, pipeline)
    return build_profile(breathing, valid.points)


def _profile_job(args):
    count, variant = args
    return count, variant, _scene_profile(count, variant)


def _classifier_dataset():
    """Simulator profiles: 12 base scenes per class, row-shuffle augmented.

    Variants 100..111 are distinct from the counting suite; the last three
    variants per class are held out for validation. Also returns the
    held-out two-person profiles for the vote-confidence check.
    """
    jobs = [(count, v) for count in scene_suite.CLASSES for v in range(100, 112)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        profiles = list(pool.map(_profile_job, jobs, chunksize=4))
    train, valid, two_person = [], [], []
    for count, variant, profile in profiles:
        target = train if variant < 109 else valid
        for j in range(10):
            target.append((rasterize_profile(augment_profile(profile, j)), count))
        if count == 2 and variant >= 109 and profile.n_components >= 1:
            two_person.append(profile)
    return train, valid, two_person


def _reference_profile():
    profile = _scene_profile(3, 0)
    assert profile.n_components >= 2
    return profile


def test_criterion_9_deterministic_count_json(tmp_path):
    scene = Scene(
        persons=(
            Person(x=1.5, y=-0.45, breathing_hz=0.22, breathing_amplitude=0.015),
            Person(x=2.4, y=0.4, breathing_hz=0.42, breathing_amplitude=0.01),
        ),
        noise_floor_db=-40.0,
        seed=42,
    )
    payloads = []
    for run in range(2):
        result = count_frames(
            iter_frames(LOWRES_PRESET, scene), LOWRES_PRESET, PipelineConfig(seed=7)
        )
        payloads.append(
            json.dumps(result.to_dict(), indent=2, sort_keys=True).encode("utf-8")
        )
    report(
        "criterion 9",
        payloads[0] == payloads[1],
        f"two identical-seed end-to-end runs produced byte-identical JSON "
        f"({len(payloads[0])} bytes)",
    )


def test_criterion_10_antenna_resolution_ablation(lowres_suite, full_suite):
    acc_low = _accuracy(lowres_suite)
    acc_full = _accuracy(full_suite)
    report(
        "criterion 10",
        acc_low < acc_full,
        f"12-antenna accuracy {acc_low:.1%} strictly below 192-antenna "
        f"accuracy {acc_full:.1%} on the same 40 scenes",
    )
