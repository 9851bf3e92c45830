"""Acceptance gate: ten numbered criteria, each emitting one PASS/FAIL line
with its runtime.  Fast oracle checks come first; the two long pipeline
criteria (8 and 10) run last.

Every numeric target is either a printed-table oracle, an independent
brute-force re-computation frozen here, or a physics/determinism invariant.
"""

import itertools
import time
from datetime import date

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from solarblend import evaluation, occur, pipeline, synth
from solarblend.clustering import (EXHAUSTIVE_SPLIT_LIMIT, Partition,
                                   ahc_dendrogram, best_bipartition_exhaustive,
                                   dhc, kmeans, kmedoids, pairwise_distances)
from solarblend.data import DAY_HOURS, DayProfile, HourRecord, build_day_matrix
from solarblend.data import split_train_test
from solarblend.forecasting import (M3Regressor, persistence_cloudiness,
                                    persistence_day)
from solarblend.learners import AnnRegressor, BLENDER_CANDIDATES
from solarblend.recognition import (build_pr_vector, fit_pr_classifier,
                                    pr_metrics, train_svm_binary)
from solarblend.validity import connectivity, dunn, silhouette


def _finish(num, t0, budget, failures, detail=""):
    """Record the criterion's one-line verdict, then assert."""
    elapsed = time.time() - t0
    if elapsed >= budget:
        failures = list(failures) + [f"runtime {elapsed:.1f}s >= {budget}s budget"]
    status = "PASS" if not failures else "FAIL"
    tail = detail if not failures else "; ".join(failures)
    line = f"[criterion {num}] {status} ({elapsed:.1f}s): {tail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failures, line


# --- criterion 1: pattern-recognition metric oracle -------------------------

def test_criterion_01_pr_metric_oracle():
    t0 = time.time()
    failures = []
    cm = np.array([[36, 2, 0], [3, 31, 8], [1, 3, 11]])
    stv, pcs, acc = pr_metrics(cm)
    if not np.allclose(stv * 100, [90.0, 86.1, 57.9], atol=0.05):
        failures.append(f"sensitivity {stv * 100}")
    if not np.allclose(pcs * 100, [94.7, 73.8, 73.3], atol=0.05):
        failures.append(f"precision {pcs * 100}")
    if abs(acc * 100 - 82.1) > 0.05:
        failures.append(f"accuracy {acc * 100}")
    _finish(1, t0, 1.0, failures,
            "confusion-matrix sensitivities/precisions/accuracy within 0.05pp")


# --- criterion 2: improvement oracle ----------------------------------------

def test_criterion_02_improvement_oracle():
    t0 = time.time()
    failures = []
    v1 = evaluation.improvement(9.73, 9.66)
    v2 = evaluation.improvement(11.46, 9.73)
    if abs(v1 - 0.72) > 0.01:
        failures.append(f"improvement(9.73, 9.66) = {v1}")
    if abs(v2 - 15.10) > 0.1:
        failures.append(f"improvement(11.46, 9.73) = {v2}")
    _finish(2, t0, 1.0, failures,
            f"improvement values {v1:.3f}% and {v2:.3f}% within tolerance")


# --- criterion 3: cluster-count recovery on synthetic days ------------------

def _ari(a, b):
    from sklearn.metrics import adjusted_rand_score
    return adjusted_rand_score(a, b)


def test_criterion_03_occur_recovery():
    t0 = time.time()
    failures = []
    hits = 0
    for seed in range(20):
        ds, labels = synth.synth_generate(synth.SynthConfig(seed=seed))
        X = build_day_matrix(ds)
        out = occur.run_occur(X, k_max=8, seed=seed)
        if out.k_opt == 3 and _ari(labels, out.best_partition.labels) >= 0.9:
            hits += 1
    if hits < 18:
        failures.append(f"k_opt=3 with ARI>=0.9 on only {hits}/20 seeds")
    _finish(3, t0, 60.0, failures,
            f"k_opt=3 and ARI>=0.9 on {hits}/20 seeds")


# --- criterion 4: clustering algorithm oracles ------------------------------

def _naive_average_linkage(X):
    dm = pairwise_distances(X)
    clusters = {i: [i] for i in range(len(X))}
    next_id = len(X)
    steps = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            d = np.mean([dm[i, j] for i in clusters[a] for j in clusters[b]])
            if best is None or d < best[0] - 1e-12:
                best = (d, a, b)
        d, a, b = best
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        steps.append((a, b, d))
        next_id += 1
    return steps


def _split_value(dm, mask):
    a = np.flatnonzero(mask)
    b = np.flatnonzero(~mask)
    return dm[np.ix_(a, b)].mean()


def test_criterion_04_clustering_oracles():
    t0 = time.time()
    failures = []

    rng = np.random.default_rng(10)
    for _ in range(50):
        n = int(rng.integers(4, 9))
        k = int(rng.integers(2, 4))
        X = rng.normal(size=(n, 2))
        dm = pairwise_distances(X)
        best = min(dm[:, list(c)].min(axis=1).sum()
                   for c in itertools.combinations(range(n), k))
        p = kmedoids(X, k, seed=int(rng.integers(1000)))
        if abs(p.objective - best) > 1e-9:
            failures.append(f"kmedoids objective {p.objective} != exhaustive {best}")
            break

    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(3, 13))
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        expected = _naive_average_linkage(X)
        got = ahc_dendrogram(X).steps
        ok = len(got) == len(expected) and all(
            {ga, gb} == {ea, eb} and abs(gh - eh) < 1e-9
            for (ga, gb, gh), (ea, eb, eh) in zip(got, expected))
        if not ok:
            failures.append("agglomerative merge sequence != naive O(n^3) oracle")
            break

    if EXHAUSTIVE_SPLIT_LIMIT < 12:
        failures.append("divisive exhaustive-split threshold below 12")
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(4, 13))
        X = rng.normal(size=(n, 3))
        dm = pairwise_distances(X)
        p, _ = dhc(X, 2)
        mask = p.labels == p.labels[0]
        e = best_bipartition_exhaustive(dm)
        if abs(_split_value(dm, mask) - _split_value(dm, e)) > 1e-9:
            failures.append("divisive split != exhaustive bipartition")
            break

    rng = np.random.default_rng(13)
    for run in range(100):
        n = int(rng.integers(6, 40))
        X = rng.normal(size=(n, 3))
        p = kmeans(X, int(rng.integers(2, 5)), seed=run)
        tr = p.objective_trace
        if any(tr[i + 1] > tr[i] + 1e-9 for i in range(len(tr) - 1)):
            failures.append("kmeans objective increased during iteration")
            break

    _finish(4, t0, 30.0, failures,
            "kmedoids exact on 50, AHC oracle on 50, DHC exhaustive split, "
            "kmeans monotone on 100 runs")


# --- criterion 5: validity-index oracles ------------------------------------

def _ref_connectivity(labels, dm, n_b):
    total = 0.0
    n = len(dm)
    for i in range(n):
        order = sorted((j for j in range(n) if j != i),
                       key=lambda j: (dm[i, j], j))
        for rank, j in enumerate(order[:n_b], start=1):
            if labels[j] != labels[i]:
                total += 1.0 / rank
    return total


def _ref_silhouette(labels, dm):
    n = len(dm)
    vals = []
    for i in range(n):
        means = []
        for c in range(max(labels) + 1):
            members = [j for j in range(n) if labels[j] == c]
            means.append(sum(dm[i, j] for j in members) / len(members))
        d_a = means[labels[i]]
        d_b = min(m for c, m in enumerate(means) if c != labels[i])
        denom = max(d_a, d_b)
        vals.append(0.0 if denom == 0 else (d_b - d_a) / denom)
    return sum(vals) / n


def _ref_dunn(labels, dm):
    n = len(dm)
    inter = min(dm[i, j] for i in range(n) for j in range(n)
                if labels[i] != labels[j])
    intra = max(dm[i, j] for i in range(n) for j in range(n)
                if i != j and labels[i] == labels[j])
    return inter / intra


def _random_partitions(count, seed):
    rng = np.random.default_rng(seed)
    while count > 0:
        n = int(rng.integers(4, 21))
        k = int(rng.integers(2, min(n, 5)))
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        labels = rng.integers(0, k, size=n)
        labels[:k] = np.arange(k)
        rng.shuffle(labels)
        if np.bincount(labels, minlength=k).min() == 0:
            continue
        count -= 1
        yield X, labels, k


def test_criterion_05_validity_oracles():
    t0 = time.time()
    failures = []
    for X, labels, k in _random_partitions(100, seed=42):
        dm = pairwise_distances(X)
        part = Partition(k=k, labels=labels, method="manual")
        n_b = min(10, len(X) - 1)
        if abs(connectivity(part, dm, n_b=n_b)
               - _ref_connectivity(labels, dm, n_b)) > 1e-9:
            failures.append("connectivity != brute force")
            break
        if abs(silhouette(part, dm) - _ref_silhouette(labels, dm)) > 1e-9:
            failures.append("silhouette != brute force")
            break
        if (np.bincount(labels).max() > 1
                and abs(dunn(part, dm) - _ref_dunn(labels, dm)) > 1e-9):
            failures.append("dunn != brute force")
            break
    for X, labels, k in _random_partitions(1000, seed=7):
        dm = pairwise_distances(X)
        part = Partition(k=k, labels=labels, method="manual")
        s = silhouette(part, dm)
        c = connectivity(part, dm, n_b=min(10, len(X) - 1))
        if not (-1.0 - 1e-12 <= s <= 1.0 + 1e-12 and c >= 0.0):
            failures.append("range invariant violated")
            break
        if np.bincount(labels).max() > 1 and dunn(part, dm) < 0.0:
            failures.append("negative dunn")
            break
    _finish(5, t0, 10.0, failures,
            "brute-force agreement on 100 instances (1e-9), "
            "ranges on 1000 fuzzed partitions")


# --- criterion 6: SVM correctness and day recognition -----------------------

def test_criterion_06_svm():
    t0 = time.time()
    failures = []

    X1 = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y1 = np.array([-1, -1, -1, 1, 1, 1])
    Xx = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    yx = np.array([1, 1, -1, -1])
    for X, y, name in ((X1, y1, "1-d"), (Xx, yx, "XOR")):
        m = train_svm_binary(X, y, C=10.0, rho=1.0, seed=0)
        pred = np.sign(m.decision(X))
        if not np.array_equal(pred, y):
            failures.append(f"{name} training accuracy < 100%")
        a, yl = m.alphas, m.train_labels
        if np.any(a < -1e-6) or np.any(a > 10.0 + 1e-6):
            failures.append(f"{name} alpha box constraint violated")
        if abs(np.dot(a, yl)) > 1e-6:
            failures.append(f"{name} sum(alpha*y) = {np.dot(a, yl)}")

    rng = np.random.default_rng(5)
    centers = np.array([[0.0, 0.0], [6.0, 0.0], [3.0, 6.0]])
    Xb = np.vstack([c + rng.normal(scale=0.8, size=(40, 2)) for c in centers])
    yb = np.repeat([0, 1, 2], 40)
    order = rng.permutation(len(yb))
    Xb, yb = Xb[order], yb[order]
    clf = fit_pr_classifier(Xb[:90], yb[:90], seed=0)
    held = float(np.mean(clf.predict(Xb[90:]) == yb[90:]))
    if held < 0.95:
        failures.append(f"3-blob held-out accuracy {held:.3f} < 0.95")

    ds, labels = synth.synth_generate(synth.SynthConfig(seed=0))
    lab_of = {d.date: int(l) for d, l in zip(ds.days, labels)}
    tagged = split_train_test(ds, ratio=0.75, seed=0)
    tr, te = tagged.subset("train"), tagged.subset("test")
    clf2 = fit_pr_classifier(np.vstack([build_pr_vector(d) for d in tr]),
                             np.array([lab_of[d.date] for d in tr]), seed=0)
    pred = clf2.predict(np.vstack([build_pr_vector(d) for d in te]))
    e2e = float(np.mean(pred == np.array([lab_of[d.date] for d in te])))
    if e2e < 0.80:
        failures.append(f"end-to-end day-recognition accuracy {e2e:.3f} < 0.80")

    _finish(6, t0, 60.0, failures,
            f"separable sets perfect, dual feasible, blob held-out "
            f"{held:.2f}, day recognition {e2e:.2f}")


# --- criterion 7: learner numerics and blender selection --------------------

def test_criterion_07_learner_numerics():
    t0 = time.time()
    failures = []

    rng = np.random.default_rng(0)
    ann = AnnRegressor(hidden=5, seed=0)
    X = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    w = ann.init_params(3)
    _, g = ann.loss_and_grad(w, X, y)
    fd = np.zeros_like(w)
    h = 1e-6
    for i in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        fd[i] = (ann.loss_and_grad(wp, X, y)[0]
                 - ann.loss_and_grad(wm, X, y)[0]) / (2 * h)
    rel = np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8))
    if rel >= 1e-4:
        failures.append(f"ANN gradient max relative error {rel:.2e}")

    from solarblend.learners import LearnerVariant, fit_base_learner
    Xl = rng.normal(size=(60, 4))
    yl = Xl @ np.array([2.0, -1.0, 0.5, 3.0]) + 7.0
    m = fit_base_learner(LearnerVariant("r", "ridge", {"alpha": 1e-10}), Xl, yl)
    rmse = float(np.sqrt(np.mean((m.predict(Xl) - yl) ** 2)))
    if rmse >= 1e-6:
        failures.append(f"ridge linear-recovery RMSE {rmse:.2e}")

    for seed in range(3):
        rng2 = np.random.default_rng(100 + seed)
        Xf = rng2.normal(size=(80, 6))
        yf = np.sin(Xf[:, 0]) + 0.5 * Xf[:, 1] ** 2 + rng2.normal(scale=0.1,
                                                                  size=80)
        reg = M3Regressor(folds=5, seed=seed).fit(Xf, yf + 5.0)
        means = {n: float(np.mean(s)) for n, s in reg.cv_table_.items()}
        if means[reg.blender_name_] > min(means.values()) + 1e-12:
            failures.append(f"selected blender {reg.blender_name_} not minimal")
        if set(means) != {c.name for c in BLENDER_CANDIDATES}:
            failures.append("CV table missing a blender candidate")

    _finish(7, t0, 60.0, failures,
            "ANN gradient vs finite differences, exact ridge recovery, "
            "blender selection minimal on stored CV table (3 fits)")


# --- criterion 9: persistence and physics invariants ------------------------

def _clear_day(d):
    recs = []
    for hour in DAY_HOURS:
        clr = max(0.0, 900.0 * np.sin(np.pi * (hour - 6) / 14))
        recs.append(HourRecord(date=d, hour=hour, ghi=clr, ghi_clr=clr,
                               dni=500.0, dhi=100.0, temp=20.0, rh=40.0,
                               pres=1013.0, ws=3.0, wd=180.0, img_mu=0.0,
                               img_sigma=0.05, img_entropy=2.0))
    return DayProfile(d, tuple(recs))


@pytest.fixture(scope="module")
def fast_artifacts():
    ds, _ = synth.synth_generate(synth.SynthConfig(n_days=48, seed=2))
    cfg = pipeline.PipelineConfig(k_max=4, folds=3, seed=2,
                                  catalog_names=("svr1", "gbm1"),
                                  blender_names=("ridge", "knn"))
    return pipeline.run_pipeline(cfg, dataset=ds)


def test_criterion_09_persistence_physics(fast_artifacts):
    t0 = time.time()
    failures = []

    if persistence_cloudiness(400.0, 800.0, 900.0) != pytest.approx(450.0):
        failures.append("spot value (400, 800, 900) != 450")
    if persistence_cloudiness(700.0, 700.0, 550.0) != pytest.approx(550.0):
        failures.append("hourly clear-sky identity broken")
    d1 = _clear_day(date(2023, 6, 1))
    d2 = _clear_day(date(2023, 6, 2))
    fc = persistence_day(d2, d1)
    actual = np.array([d2.record_at(h).ghi for h in DAY_HOURS])
    if not np.allclose(fc, actual, atol=1e-9):
        failures.append("day persistence does not reproduce clear-sky input")

    fcs = fast_artifacts.forecasts
    if not (fcs["ghi_forecast"] >= 0.0).all():
        failures.append("negative emitted forecast")

    if evaluation.nmae(actual, actual) != 0.0 or evaluation.nrmse(actual,
                                                                  actual) != 0.0:
        failures.append("perfect forecast has nonzero error")

    _finish(9, t0, 1.0, failures,
            "clear-sky identities, spot value 450, emitted forecasts >= 0, "
            "perfect-forecast errors 0")


# --- criterion 8: direction of effect on 10 synthetic seeds -----------------

def _group_scores(forecasts):
    scores = {}
    for tag, sub in forecasts.groupby("model_tag"):
        err = np.abs(sub["ghi_forecast"] - sub["ghi_actual"])
        scores[tag] = 100.0 * float(err.mean()) / float(sub["ghi_actual"].mean())
    def med(prefix):
        return float(np.median([v for k, v in scores.items()
                                if k.startswith(prefix)
                                and not k.endswith("persistence")]))
    return (scores["uc-m3:c_opt"], scores["aio-m3:c_opt"],
            med("uc-saml:"), med("aio-saml:"))


def test_criterion_08_direction_of_effect():
    t0 = time.time()
    counts = [0, 0, 0]
    for seed in range(10):
        ds, _ = synth.synth_generate(synth.SynthConfig(n_days=192, seed=seed))
        cfg = pipeline.PipelineConfig(k_max=8, folds=3, seed=seed)
        art = pipeline.run_pipeline(cfg, dataset=ds)
        uc, aio, uc_saml, aio_saml = _group_scores(art.forecasts)
        counts[0] += uc <= aio
        counts[1] += uc <= uc_saml
        counts[2] += aio <= aio_saml
    failures = []
    names = ("UC-M3 <= AIO-M3", "UC-M3 <= UC-SAML", "AIO-M3 <= AIO-SAML")
    for name, c in zip(names, counts):
        if c < 7:
            failures.append(f"{name} on only {c}/10 seeds")
    _finish(8, t0, 900.0, failures,
            "median-nMAE orderings " + ", ".join(
                f"{n} on {c}/10 seeds" for n, c in zip(names, counts)))


# --- criterion 10: determinism ----------------------------------------------

def test_criterion_10_determinism(tmp_path):
    t0 = time.time()
    failures = []
    ds, _ = synth.synth_generate(synth.SynthConfig(n_days=64, seed=5))
    outputs = {}
    for tag, n_jobs in (("a", 1), ("b", 1), ("c", 4)):
        cfg = pipeline.PipelineConfig(k_max=8, folds=3, seed=5, n_jobs=n_jobs)
        art = pipeline.run_pipeline(cfg, dataset=ds)
        out = tmp_path / tag
        pipeline.emit_outputs(art, out)
        outputs[tag] = {f: (out / f).read_bytes()
                        for f in ("forecasts.csv", "evaluation-report.csv")}
    for f in ("forecasts.csv", "evaluation-report.csv"):
        if outputs["a"][f] != outputs["b"][f]:
            failures.append(f"{f} differs between identical serial runs")
        if outputs["a"][f] != outputs["c"][f]:
            failures.append(f"{f} differs under intra-stage parallelism")
    _finish(10, t0, 900.0, failures,
            "forecasts.csv and evaluation-report.csv byte-identical across "
            "two serial runs and one 4-worker run")
