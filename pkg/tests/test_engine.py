import math

import numpy as np
import pytest

from align_lab.data import SynthSpec, gen_synthetic, split
from align_lab.engine import Diagnostics, MethodConfig, TrainSchedule, eta, evaluate, self_train
from align_lab.errors import EmptyEvalSet, EmptyLabeledSet, OutOfRange
from align_lab.model import TwoStream, forward, init_params, loss_and_grads, lr_at, sgd_step
from align_lab.tracker import init_stats, update_labeled, update_unlabeled
from align_lab.vcq import VcqConfig, compute_lengths

SCHED = TrainSchedule(epochs=6, labeled_batch=8, unlabeled_batch=16, base_lr=0.2,
                      decay_epochs=(4,), seed=5, hidden=8)


def test_eta():
    assert eta(256, 256) == 1.0
    assert eta(64, 256) == 0.25
    assert eta(1, 256) == 1 / 256
    for bad in (0, 257):
        with pytest.raises(OutOfRange):
            eta(bad, 256)


def test_records_shape_and_eta_ramp(small_split):
    _, recs = self_train(small_split, SCHED, VcqConfig(L=64), 0.95, MethodConfig())
    assert [r.epoch for r in recs] == list(range(1, 7))
    etas = [r.eta for r in recs]
    assert etas == sorted(etas) and etas[-1] == 1.0
    assert recs[0].unsupervised_loss == 0.0
    assert all(len(r.pseudo_label_histogram) == 3 for r in recs)


def test_one_epoch_equals_supervised_plus_init(small_split):
    sched = TrainSchedule(epochs=1, labeled_batch=8, seed=2, hidden=8, base_lr=0.2)
    diag = Diagnostics()
    ts, recs = self_train(small_split, sched, VcqConfig(L=64), 0.95, MethodConfig(), diag)
    ts_sup, _ = self_train(small_split, sched, VcqConfig(L=64), 0.95,
                           MethodConfig(use_unlabeled=False))
    for a, b in zip(ts.model().arrays(), ts_sup.model().arrays()):
        np.testing.assert_array_equal(a, b)
    assert sum(recs[0].pseudo_label_histogram) > 0
    assert len(diag.queue) == 1 and diag.queue[0][2].sum() > 0


def test_no_unlabeled_data_means_no_unsupervised_loss(small_split):
    _, recs = self_train(small_split.upper_bound(), SCHED, VcqConfig(L=64))
    assert all(r.unsupervised_loss == 0.0 for r in recs)
    assert all(sum(r.pseudo_label_histogram) == 0 for r in recs)


def test_histogram_counts_accepted(small_split):
    diag = Diagnostics()
    _, recs = self_train(small_split, SCHED, VcqConfig(L=64, delta=0.5), 0.95, MethodConfig(), diag)
    for r, (_, cap, occ, _) in zip(recs, diag.queue):
        assert sum(r.pseudo_label_histogram) >= occ.sum() - sum(cap)
        assert np.all(occ <= cap)


def test_trace_order(small_split):
    diag = Diagnostics()
    self_train(small_split, SCHED, VcqConfig(L=64), 0.95, MethodConfig(), diag)
    by_epoch = {}
    for epoch, name in diag.trace:
        by_epoch.setdefault(epoch, []).append(name)
    assert by_epoch[1] == ["train", "update_stats", "align", "refresh_vcq", "offer", "evaluate"]
    for e in range(2, 7):
        assert by_epoch[e] == ["train", "ema_couple", "update_stats", "align", "refresh_vcq",
                               "offer", "evaluate"]


def test_determinism(small_split):
    runs = [self_train(small_split, SCHED, VcqConfig(L=64), 0.95, MethodConfig("csda"))
            for _ in range(2)]
    assert runs[0][1] == runs[1][1]
    for a, b in zip(runs[0][0].model().arrays(), runs[1][0].model().arrays()):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("mode", ["none", "da", "csda"])
def test_modes_run(small_split, mode):
    ts, recs = self_train(small_split, SCHED, VcqConfig(L=64), 0.95,
                          MethodConfig(mode, temperature=0.7 if mode == "csda" else None))
    assert all(math.isfinite(r.supervised_loss) for r in recs)


def test_empty_labeled(small_split):
    empty = small_split.labeled.subset([])
    bad = type(small_split)(empty, small_split.unlabeled, small_split.val, small_split.test,
                            small_split.unlabeled_truth)
    with pytest.raises(EmptyLabeledSet):
        self_train(bad, SCHED)


def test_evaluate_constant_and_separable(rng):
    n, d = 3, 2
    const = TwoStream((np.zeros((4, d)), np.zeros(4)), (np.zeros((4, d)), np.zeros(4)),
                      (np.zeros((n, 4)), np.array([0.0, 1.0, 0.0])))
    X = rng.normal(size=(9, d))
    y = np.repeat(np.arange(n), 3)
    auc, mca_, cm = evaluate(const, X, y)
    assert mca_ == pytest.approx(1 / 3)
    assert auc == 0.5
    assert cm.sum(axis=1).tolist() == [3, 3, 3]
    with pytest.raises(EmptyEvalSet):
        evaluate(const, np.zeros((0, d)), np.zeros(0, dtype=int))

    ds = gen_synthetic(SynthSpec(n=3, d=4, priors=(0.4, 0.3, 0.3), sigma=0.05, mean_scale=3.0,
                                 count=300, seed=1))
    sp = split(ds, 60, 5, 20, seed=1)
    ts, _ = self_train(sp, TrainSchedule(epochs=60, labeled_batch=16, base_lr=0.5, seed=1,
                                         hidden=8), VcqConfig(L=64))
    _, mca_, cm = evaluate(ts, sp.test.features, sp.test.labels)
    assert mca_ == 1.0
    assert np.array_equal(cm, np.diag(np.diag(cm)))


def vanilla_self_training(sp, sched, cfg, omega):
    """Confidence-thresholded self-training written directly, without alignment or Vcq."""
    lab, unl = sp.labeled, sp.unlabeled
    n, d = lab.n, lab.d
    init_rng, shuffle_rng, sweep_rng, sample_rng = np.random.default_rng(sched.seed).spawn(4)
    params = init_params(d, sched.hidden, n, init_rng)
    stats = init_stats(n, omega)
    queues = [[] for _ in range(n)]
    steps = math.ceil(len(lab) / sched.labeled_batch)
    for epoch in range(1, sched.epochs + 1):
        lr = lr_at(epoch, sched.base_lr, sched.decay_epochs)
        order = shuffle_rng.permutation(len(lab))
        for step in range(steps):
            idx = order[step * sched.labeled_batch:(step + 1) * sched.labeled_batch]
            pool = [item for q in queues for item in q]
            xu, qu = np.zeros((0, d)), np.zeros((0, n))
            if epoch > 1 and pool:
                pick = sample_rng.choice(len(pool), size=min(sched.unlabeled_batch, len(pool)),
                                         replace=False)
                xu = np.stack([pool[k][0] for k in pick])
                qu = np.stack([pool[k][1] for k in pick])
            p_lab = forward(params, lab.features[idx])
            _, grads = loss_and_grads(params, lab.features[idx], lab.labels[idx], xu, qu,
                                      epoch / sched.epochs if epoch > 1 else 0.0)
            params = sgd_step(params, grads, lr)
            stats = update_labeled(stats, p_lab, lab.labels[idx])
        stats = update_labeled(stats, forward(params, lab.features), lab.labels)
        probs = forward(params, unl.features)
        perm = sweep_rng.permutation(len(unl))
        for s in range(0, len(perm), sched.unlabeled_batch):
            stats = update_unlabeled(stats, probs[perm[s:s + sched.unlabeled_batch]])
        caps = compute_lengths(stats, cfg)
        taus = np.minimum(stats.unlabeled_conf, cfg.delta)
        queues = [q[len(q) - caps[c]:] if len(q) > caps[c] else q for c, q in enumerate(queues)]
        for r in perm:
            c = int(np.argmax(probs[r]))
            if probs[r][c] > taus[c]:
                queues[c].append((unl.features[r], probs[r]))
                if len(queues[c]) > caps[c]:
                    queues[c].pop(0)
    return params


def test_reduces_to_vanilla_self_training():
    ds = gen_synthetic(SynthSpec(n=3, d=4, priors=(0.6, 0.3, 0.1), count=200 + 30, seed=4))
    sp = split(ds, 40, 5, 5, seed=4)
    assert len(sp.labeled) + len(sp.unlabeled) == 200
    sched = TrainSchedule(epochs=8, labeled_batch=16, unlabeled_batch=16, base_lr=0.3,
                          decay_epochs=(5,), seed=4, hidden=6)
    cfg = VcqConfig(L=60, gamma=1.0, delta=0.99)
    ts, _ = self_train(sp, sched, cfg, 0.95, MethodConfig("none"))
    direct = vanilla_self_training(sp, sched, cfg, 0.95)
    for a, b in zip(ts.model(2).arrays(), direct.arrays()):
        np.testing.assert_array_equal(a, b)
