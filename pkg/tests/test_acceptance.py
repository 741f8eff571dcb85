"""Whole-system acceptance checks, one test per promised property.

The first four pin the numerical core: analytic gradients against central
finite differences, the hard-layout geometry, unimodality of every proxy and
target distribution, and value-level agreement with the brute-force oracle.
The remaining six train small models on synthetic data and check the
qualitative claims: all named variants learn a separable task, the ordinal
constraint lowers MAE on an overlapping task, hyperparameter sweeps have
interior optima, constrained training does not collapse, the ablation
directions hold, and repeated runs are byte-identical.
"""

import math
import time
import warnings

import numpy as np

import oracles
from cpl.config import RunConfig
from cpl.distributions import (
    CategoricalDistribution,
    Smoothing,
    assignment_distribution,
    proxy_distribution,
    total_variation,
)
from cpl.experiments import run_training
from cpl.geometry import (
    FreeLayout,
    LinearLayout,
    SemicircularLayout,
    Similarity,
    gen_linear_proxies,
    gen_semicircular_proxies,
)
from cpl.losses import batch_loss, batch_loss_value, loss_basic, loss_total, loss_unimodal
from cpl.model import ProblemSpec, init_model
from cpl.training import evaluate, train

FD_STEP = 1e-5
REL_TOL = 1e-4

# The six named constrained variants: both hard layouts with their canonical
# similarity, and the soft penalty with either smoothing times either
# similarity.  The unconstrained cross-entropy baseline is deliberately not
# in this list; it is the thing the variants are compared against.
SIX_VARIANTS = (
    dict(layout="linear", similarity="euclidean_t", loss_mode="hard"),
    dict(layout="semicircular", similarity="cosine", loss_mode="hard"),
    dict(layout="free", similarity="euclidean_t", loss_mode="soft", smoothing="poisson"),
    dict(layout="free", similarity="cosine", loss_mode="soft", smoothing="poisson"),
    dict(layout="free", similarity="euclidean_t", loss_mode="soft", smoothing="binomial"),
    dict(layout="free", similarity="cosine", loss_mode="soft", smoothing="binomial"),
)

UPL = dict(layout="free", similarity="euclidean_t", loss_mode="upl")

# A separable task every variant should ace, and an overlapping one where the
# constrained/unconstrained comparison and the sweep shapes live.
SEPARABLE = dict(
    num_classes=8, input_dim=16, hidden_dim=64, feature_dim=64,
    n_per_class=80, noise_sigma=0.05, overlap=0.0,
    train_fraction=0.70, val_fraction=0.15, test_fraction=0.15,
    epochs=48, seed=0,
)
NOISY = dict(
    num_classes=8, input_dim=16, hidden_dim=64, feature_dim=64,
    n_per_class=120, noise_sigma=0.25, overlap=0.45,
    train_fraction=0.5, val_fraction=0.1, test_fraction=0.4,
    epochs=24,
)
# The ablation task slows the extractor so the feature scale is sticky and
# the proxies have to do the adapting; with the paper-rate extractor a fresh
# two-layer net just rescales its output to meet whatever norm it is handed,
# and fixing ``v0`` costs nothing.
ABLATION = dict(
    num_classes=12, input_dim=16, hidden_dim=64, feature_dim=64,
    n_per_class=120, noise_sigma=0.25, overlap=0.45,
    train_fraction=0.5, val_fraction=0.1, test_fraction=0.4,
    epochs=24, lr_extractor=0.0001,
)


def fit(task, seed, **extra):
    """Train one model on the task and return its test metrics."""
    config = RunConfig(**task, **extra, seed=seed)
    train_set, val_set, test_set = config.load_splits()
    model = init_model(config.problem_spec(), seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        train(model, train_set, val_set, config.train_config())
    return evaluate(model, test_set)


def mean_mae(task, seeds, **extra):
    return float(np.mean([fit(task, seed, **extra).mae for seed in seeds]))


# ---------------------------------------------------------------------------
# 1. gradients against central finite differences
# ---------------------------------------------------------------------------

def frozen_targets(layout, similarity) -> np.ndarray:
    proxies = layout.proxies()
    return np.stack(
        [proxy_distribution(k, proxies, similarity).probs for k in range(proxies.shape[0])]
    )


def smooth_case(seed):
    """Random small pipeline posed away from every non-differentiable point.

    Finite differences are only meaningful where the loss is smooth, so the
    draw is retried until no hidden unit sits near its kink, no embedded
    feature or proxy is near the origin (cosine), and the semicircular angle
    is away from its degenerate endpoints.
    """
    rng = np.random.default_rng(seed)
    variant = SIX_VARIANTS[seed % len(SIX_VARIANTS)]
    spec = ProblemSpec(
        num_classes=int(rng.integers(3, 7)),
        input_dim=int(rng.integers(2, 5)),
        hidden_dim=int(rng.integers(3, 7)),
        feature_dim=int(rng.integers(2, 6)),
        **variant,
    )
    for attempt in range(50):
        model = init_model(spec, seed + 1000 * attempt)
        proxies = model.layout.proxies()
        if spec.similarity == "cosine" and np.linalg.norm(proxies, axis=1).min() < 0.05:
            continue
        if spec.layout == "semicircular":
            v0 = model.params["layout.v0"].value
            v1 = model.params["layout.v1"].value
            cos_gamma = v0 @ v1 / (np.linalg.norm(v0) * np.linalg.norm(v1))
            gamma = math.acos(float(np.clip(cos_gamma, -1.0, 1.0)))
            if not 0.15 < gamma < math.pi - 0.15:
                continue
        x = rng.normal(0.0, 1.0, size=(2, spec.input_dim))
        pre = x @ model.extractor.w1 + model.extractor.b1
        feats = model.extract_batch(x)
        if np.abs(pre).min() < 1e-3:
            continue
        if spec.similarity == "cosine" and np.linalg.norm(feats, axis=1).min() < 1e-2:
            continue
        labels = rng.integers(0, spec.num_classes, size=2)
        return model, x, labels
    raise AssertionError(f"no smooth evaluation point found for seed {seed}")


def assert_close_grad(analytic: float, fd: float) -> None:
    scale = max(abs(analytic), abs(fd))
    if scale < 1e-6:
        assert abs(analytic - fd) < 1e-9
        return
    assert abs(analytic - fd) / scale < REL_TOL


class TestGradientOracle:
    def test_every_gradient_matches_finite_differences(self):
        started = time.perf_counter()
        for seed in range(100):
            model, x, labels = smooth_case(seed)
            layout, similarity = model.layout, model.similarity
            loss_config = model.loss_config
            targets = frozen_targets(layout, similarity)

            feats = model.extract_batch(x)
            out = batch_loss(feats, labels, layout, similarity, loss_config)
            grads = {
                f"extractor.{name}": g
                for name, g in model.extractor.backward(out.d_features).items()
            }
            grads.update({f"layout.{name}": g for name, g in out.d_params.items()})

            # gradient with respect to the embedded features themselves
            feats = feats.copy()
            for idx in np.ndindex(feats.shape):
                kept = feats[idx]
                feats[idx] = kept + FD_STEP
                hi = batch_loss_value(
                    feats, labels, layout, similarity, loss_config, basic_targets=targets
                )
                feats[idx] = kept - FD_STEP
                lo = batch_loss_value(
                    feats, labels, layout, similarity, loss_config, basic_targets=targets
                )
                feats[idx] = kept
                assert_close_grad(out.d_features[idx], (hi - lo) / (2 * FD_STEP))

            # gradient with respect to every extractor weight and layout vector
            for param in model.params:
                analytic = np.asarray(grads[param.name]).reshape(-1)
                flat = param.value.reshape(-1)
                for i in range(flat.size):
                    kept = flat[i]
                    flat[i] = kept + FD_STEP
                    hi = batch_loss_value(
                        model.extract_batch(x), labels, layout, similarity,
                        loss_config, basic_targets=targets,
                    )
                    flat[i] = kept - FD_STEP
                    lo = batch_loss_value(
                        model.extract_batch(x), labels, layout, similarity,
                        loss_config, basic_targets=targets,
                    )
                    flat[i] = kept
                    assert_close_grad(analytic[i], (hi - lo) / (2 * FD_STEP))
        assert time.perf_counter() - started < 30.0


# ---------------------------------------------------------------------------
# 2. hard-layout geometry
# ---------------------------------------------------------------------------

def angle_between(u, v) -> float:
    # atan2 of the rejection norm stays accurate where arccos loses digits,
    # which matters for the two-class layout whose adjacent angle is pi.
    dot = float(u @ v)
    rejection = u - dot * v
    return math.atan2(float(np.linalg.norm(rejection)), dot)


class TestHardLayoutGeometry:
    def test_semicircular_norms_angles_and_linear_collinearity(self):
        rng = np.random.default_rng(17)
        for num_classes in range(2, 17):
            beta = math.pi / (num_classes - 1)
            accepted = 0
            while accepted < 50:
                dim = int(rng.integers(2, 9))
                v0 = rng.normal(size=dim)
                v1 = rng.normal(size=dim)
                cos_gamma = v0 @ v1 / (np.linalg.norm(v0) * np.linalg.norm(v1))
                if abs(cos_gamma) > 0.999:
                    continue
                accepted += 1

                proxies = gen_semicircular_proxies(v0, v1, num_classes)
                norms = np.linalg.norm(proxies, axis=1)
                assert np.abs(norms - 1.0).max() < 1e-9
                for k in range(num_classes - 1):
                    assert abs(angle_between(proxies[k], proxies[k + 1]) - beta) < 1e-9

                direction = rng.normal(size=dim)
                line = gen_linear_proxies(direction, num_classes)
                for k in range(num_classes):
                    assert np.array_equal(line[k], k * direction)


# ---------------------------------------------------------------------------
# 3. unimodality of Q under hard layouts and of every smoothing target
# ---------------------------------------------------------------------------

def assert_unimodal(probs: np.ndarray, mode: int) -> None:
    assert int(np.argmax(probs)) == mode
    for i in range(mode, probs.size - 1):
        assert probs[i + 1] <= probs[i] + 1e-15
    for i in range(mode, 0, -1):
        assert probs[i - 1] <= probs[i] + 1e-15


class TestUnimodalitySuite:
    def test_hard_layout_q_and_smoothing_targets_are_unimodal(self):
        rng = np.random.default_rng(23)
        euclidean = Similarity("euclidean_t")
        cosine = Similarity("cosine", 6.0)
        smoothings = (
            Smoothing.poisson(0.11, "softmax"),
            Smoothing.binomial(0.13, "softmax"),
            Smoothing.exponential(30.0, "direct"),
            Smoothing.triangular(0.9, 0.1, "direct"),
        )
        for num_classes in range(2, 33):
            dim = int(rng.integers(2, 7))
            v0 = rng.normal(size=dim) * float(rng.uniform(0.2, 3.0))
            v1 = rng.normal(size=dim)
            while abs(v0 @ v1 / (np.linalg.norm(v0) * np.linalg.norm(v1))) > 0.999:
                v1 = rng.normal(size=dim)
            line = gen_linear_proxies(v0, num_classes)
            arc = gen_semicircular_proxies(v0, v1, num_classes)
            for true_class in range(num_classes):
                q_line = proxy_distribution(true_class, line, euclidean)
                assert_unimodal(q_line.probs, true_class)
                q_arc = proxy_distribution(true_class, arc, cosine)
                assert_unimodal(q_arc.probs, true_class)
                for smoothing in smoothings:
                    target = smoothing.target(num_classes, true_class)
                    assert_unimodal(target.probs, true_class)


# ---------------------------------------------------------------------------
# 4. value-level agreement with the brute-force oracle
# ---------------------------------------------------------------------------

class TestOracleEquivalence:
    def test_twenty_seeded_cases_match_brute_force(self):
        smoothing_kinds = ("poisson", "binomial", "exponential", "triangular")
        for case in range(20):
            rng = np.random.default_rng(900 + case)
            num_classes = int(rng.integers(2, 6))
            arrangement = ("linear", "semicircular", "free")[case % 3]
            dim = int(rng.integers(2, 4)) if arrangement == "semicircular" else int(rng.integers(1, 4))
            if arrangement == "linear":
                layout = LinearLayout(rng.normal(size=dim), num_classes)
                similarity, kind = Similarity("euclidean_t"), "euclidean_t"
            elif arrangement == "semicircular":
                v0, v1 = rng.normal(size=dim), rng.normal(size=dim)
                layout = SemicircularLayout(v0, v1, num_classes)
                similarity, kind = Similarity("cosine", 6.0), "cosine"
            else:
                layout = FreeLayout(rng.normal(size=(num_classes, dim)), num_classes)
                kind = ("euclidean_t", "cosine")[case % 2]
                similarity = Similarity(kind, 6.0)
            proxies = layout.proxies()
            listed = [row.tolist() for row in proxies]
            f = rng.normal(size=dim)
            true_class = int(rng.integers(0, num_classes))

            p = assignment_distribution(f, proxies, similarity)
            expect_p = oracles.assignment_probs(kind, f.tolist(), listed)
            assert np.abs(p.probs - np.array(expect_p)).max() < 1e-10

            q = proxy_distribution(true_class, proxies, similarity)
            expect_q = oracles.proxy_probs(kind, true_class, listed)
            assert np.abs(q.probs - np.array(expect_q)).max() < 1e-10

            for smoothing_kind in smoothing_kinds:
                spec = ProblemSpec(
                    num_classes=num_classes, input_dim=dim, hidden_dim=4,
                    feature_dim=dim, layout="free", loss_mode="soft",
                    smoothing=smoothing_kind, allow_experimental=True,
                )
                target = spec.build_smoothing().target(num_classes, true_class)
                expect_u = oracles.unimodal_target_probs(
                    smoothing_kind, num_classes, true_class
                )
                assert np.abs(target.probs - np.array(expect_u)).max() < 1e-10

            basic = loss_basic(f, true_class, layout, similarity)
            expect_basic = oracles.loss_basic_value(kind, f.tolist(), listed, true_class)
            assert abs(basic.value - expect_basic) < 1e-10

            if arrangement == "free":
                smoothing_kind = smoothing_kinds[case % 4]
                spec = ProblemSpec(
                    num_classes=num_classes, input_dim=dim, hidden_dim=4,
                    feature_dim=dim, layout="free", similarity=kind,
                    loss_mode="soft", smoothing=smoothing_kind,
                    allow_experimental=True,
                )
                unimodal = loss_unimodal(
                    true_class, layout, similarity, spec.build_smoothing()
                )
                expect_uni = oracles.loss_unimodal_value(
                    kind, listed, true_class, smoothing_kind
                )
                assert abs(unimodal.value - expect_uni) < 1e-10

                total = loss_total(
                    f, true_class, layout, similarity, spec.build_loss_config()
                )
                assert abs(total.value - (expect_basic + 6.0 * expect_uni)) < 1e-10

                upl_spec = ProblemSpec(
                    num_classes=num_classes, input_dim=dim, hidden_dim=4,
                    feature_dim=dim, layout="free", similarity=kind,
                    loss_mode="upl",
                )
                ce = loss_total(
                    f, true_class, layout, similarity, upl_spec.build_loss_config()
                )
                expect_ce = oracles.cross_entropy_value(kind, f.tolist(), listed, true_class)
                assert abs(ce.value - expect_ce) < 1e-10


# ---------------------------------------------------------------------------
# 5. every named variant learns a separable synthetic task
# ---------------------------------------------------------------------------

class TestDeskScaleLearning:
    def test_all_six_variants_reach_the_bar_within_48_epochs(self):
        for variant in SIX_VARIANTS:
            config = RunConfig(**SEPARABLE, **variant)
            train_set, val_set, _ = config.load_splits()
            model = init_model(config.problem_spec(), config.seed)
            started = time.perf_counter()
            result = train(model, train_set, val_set, config.train_config())
            elapsed = time.perf_counter() - started
            best = min(result.history, key=lambda record: record.val_mae)
            assert elapsed < 120.0, variant
            assert best.val_accuracy >= 0.95, variant
            assert best.val_mae <= 0.05, variant


# ---------------------------------------------------------------------------
# 6. the ordinal constraint lowers MAE where classes overlap
# ---------------------------------------------------------------------------

class TestOrdinalAdvantage:
    def test_hard_linear_mean_mae_below_unconstrained(self):
        seeds = range(10)
        baseline = [fit(NOISY, seed, **UPL) for seed in seeds]
        accuracy = float(np.mean([m.accuracy for m in baseline]))
        assert 0.6 <= accuracy <= 0.8
        constrained = mean_mae(NOISY, seeds, **SIX_VARIANTS[0])
        assert constrained < float(np.mean([m.mae for m in baseline]))


# ---------------------------------------------------------------------------
# 7. sweep shapes: interior optima for s and tau_b, penalty beats none
# ---------------------------------------------------------------------------

class TestSweepTrends:
    def test_scale_tau_and_alpha_sweeps_have_the_expected_shape(self):
        seeds = range(8)
        semicircular = SIX_VARIANTS[1]
        by_scale = {
            s: mean_mae(NOISY, seeds, **semicircular, scale=float(s))
            for s in (2, 4, 6, 8, 10)
        }
        interior = min(by_scale[s] for s in (4, 6, 8))
        assert by_scale[2] > interior
        assert by_scale[10] > interior

        binomial = SIX_VARIANTS[4]
        by_tau = {
            tau: mean_mae(NOISY, seeds, **binomial, tau_b=tau)
            for tau in (0.07, 0.09, 0.11, 0.13, 0.15, 0.17)
        }
        interior = min(by_tau[tau] for tau in (0.09, 0.11, 0.13, 0.15))
        assert by_tau[0.07] > interior
        assert by_tau[0.17] > interior

        without = mean_mae(NOISY, seeds, **binomial, alpha=0.0)
        with_penalty = mean_mae(NOISY, seeds, **binomial, alpha=6.0)
        assert without > with_penalty


# ---------------------------------------------------------------------------
# 8. no proxy collapse when training starts from a unit direction
# ---------------------------------------------------------------------------

class TestNonCollapse:
    def test_unit_v0_training_never_flattens_q(self):
        variant = SIX_VARIANTS[0]
        for seed in range(10):
            config = RunConfig(**NOISY, **variant, seed=seed)
            spec = config.problem_spec()
            train_set, val_set, _ = config.load_splits()
            model = init_model(spec, seed)
            v0 = model.params["layout.v0"]
            v0.value[:] = v0.value / np.linalg.norm(v0.value)
            similarity = spec.build_similarity()
            uniform = CategoricalDistribution.from_logits(np.zeros(spec.num_classes))

            def distance_from_uniform() -> float:
                proxies = model.layout.proxies()
                return min(
                    total_variation(proxy_distribution(k, proxies, similarity), uniform)
                    for k in range(spec.num_classes)
                )

            gaps = [distance_from_uniform()]
            train(
                model, train_set, val_set, config.train_config(),
                epoch_callback=lambda m, record: gaps.append(distance_from_uniform()),
            )
            assert min(gaps) > 1e-3
            assert float(np.linalg.norm(model.params["layout.v0"].value)) > 1e-2


# ---------------------------------------------------------------------------
# 9. ablation directions: learnable norm wins, tempered distance wins
# ---------------------------------------------------------------------------

class TestAblationDirections:
    def test_fixed_norms_and_raw_distance_never_beat_the_defaults(self):
        seeds = range(8)
        variant = SIX_VARIANTS[0]
        learnable = mean_mae(ABLATION, seeds, **variant)
        for norm in (1.0, 3.0, 5.0, 7.0):
            fixed = mean_mae(
                ABLATION, seeds, **variant, norm_mode="fixed", fixed_norm=norm
            )
            assert fixed >= learnable, norm
        raw = mean_mae(
            ABLATION, seeds, layout="linear", similarity="neg_euclidean",
            loss_mode="hard", allow_experimental=True,
        )
        assert raw >= learnable


# ---------------------------------------------------------------------------
# 10. byte-identical reruns
# ---------------------------------------------------------------------------

class TestDeterminism:
    def test_repeated_run_writes_an_identical_metric_log(self, tmp_path):
        logs = []
        for name in ("first", "second"):
            config = RunConfig(
                **SEPARABLE, **SIX_VARIANTS[0], output_dir=str(tmp_path / name)
            )
            result = run_training(config)
            with open(result["training_log"], "rb") as handle:
                logs.append(handle.read())
        assert logs[0] == logs[1]
