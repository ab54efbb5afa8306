"""Learned stand-in environment: power predictors, datasets, and switching.

Two predictor architectures estimate a power value from a combining vector: a
low-rank positive-semidefinite quadratic form ||Q^H w||^2 (mirroring the true
power's structure) and a plain feed-forward network.  Trained predictors form
a virtual environment with the same step contract as the actual one, so the
agent can keep learning without spending real measurements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .agent import BeamAgent, LearningSession
from .arrays import PhaseCodebook, to_combiner
from .environment import PowerMeasurement, StepOutcome, estimate_sinr, metrics_log_row
from .neuralnet import Adam, DenseNet, mlp, stepwise_lr


class SurrogateDataset:
    """Pairs of (combining vector, measured power), one dataset per power kind."""

    def __init__(self, kind: str, antennas: int):
        if kind not in ("interference", "signal"):
            raise ValueError(f"kind must be 'interference' or 'signal', got {kind!r}")
        self.kind = kind
        self.antennas = antennas
        self._inputs: list[np.ndarray] = []
        self._powers: list[float] = []

    def __len__(self) -> int:
        return len(self._powers)

    def append(self, w, power: float) -> None:
        w = np.asarray(w, dtype=complex)
        if w.shape != (self.antennas,):
            raise ValueError(f"expected a length-{self.antennas} combiner, got shape {w.shape}")
        if power < 0:
            raise ValueError(f"power must be >= 0, got {power}")
        self._inputs.append(w)
        self._powers.append(float(power))

    @property
    def inputs(self) -> np.ndarray:
        if not self._inputs:
            return np.zeros((0, self.antennas), dtype=complex)
        return np.stack(self._inputs)

    @property
    def powers(self) -> np.ndarray:
        return np.asarray(self._powers, dtype=float)

    def subset(self, indices) -> "SurrogateDataset":
        out = SurrogateDataset(self.kind, self.antennas)
        for i in indices:
            out.append(self._inputs[i], self._powers[i])
        return out

    def tail(self, n: int) -> "SurrogateDataset":
        """The most recently appended n samples."""
        return self.subset(range(max(0, len(self) - n), len(self)))

    def save_csv(self, path) -> None:
        m = self.antennas
        header = [f"re_w{i+1}" for i in range(m)] + [f"im_w{i+1}" for i in range(m)] + ["power_linear"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for w, p in zip(self._inputs, self._powers):
                writer.writerow(
                    [f"{v:.17g}" for v in w.real] + [f"{v:.17g}" for v in w.imag] + [f"{p:.17g}"]
                )

    @classmethod
    def load_csv(cls, path, kind: str) -> "SurrogateDataset":
        data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
        m = (data.shape[1] - 1) // 2
        out = cls(kind, m)
        for row in data:
            out.append(row[:m] + 1j * row[m:2 * m], row[2 * m])
        return out


class QuadraticFormPredictor:
    """Power predicted as ||Q^H w||^2 (+ optional nonnegative offset), scaled.

    The quadratic form is positive semidefinite by construction, so the
    prediction is provably nonnegative and invariant to a global phase
    rotation of w.  The offset absorbs the constant noise-power term
    sigma^2*||w||^2, which keeps Q at low rank; set `use_offset=False` for the
    literal quadratic-form-only model.
    """

    def __init__(self, antennas: int, rank: int, kind: str = "interference",
                 use_offset: bool = True, rng: np.random.Generator | None = None):
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        rng = rng or np.random.default_rng(0)
        std = 1.0 / np.sqrt(2.0 * rank)
        self.q_re = rng.normal(0.0, std, size=(antennas, rank))
        self.q_im = rng.normal(0.0, std, size=(antennas, rank))
        self.offset = np.zeros(())
        self.use_offset = use_offset
        self.kind = kind
        self.scale = 1.0

    @classmethod
    def from_matrix(cls, q: np.ndarray, kind: str = "interference") -> "QuadraticFormPredictor":
        """Wrap an explicit factor matrix Q (offset 0, scale 1)."""
        q = np.asarray(q, dtype=complex)
        pred = cls(q.shape[0], q.shape[1], kind=kind, use_offset=False)
        pred.q_re = q.real.copy()
        pred.q_im = q.imag.copy()
        return pred

    @property
    def antennas(self) -> int:
        return self.q_re.shape[0]

    @property
    def rank(self) -> int:
        return self.q_re.shape[1]

    def factor(self) -> np.ndarray:
        return self.q_re + 1j * self.q_im

    def predict_batch(self, w_batch) -> np.ndarray:
        w_batch = np.asarray(w_batch, dtype=complex)
        u = w_batch @ np.conj(self.factor())
        return self.scale * ((np.abs(u) ** 2).sum(axis=1) + float(self.offset))

    def predict(self, w) -> float:
        return float(self.predict_batch(np.asarray(w, dtype=complex)[None, :])[0])

    def params(self):
        out = [self.q_re, self.q_im]
        if self.use_offset:
            out.append(self.offset)
        return out


class DensePredictor:
    """Feed-forward power predictor over a real encoding of the combiner.

    `encoding="reim"` feeds [Re(w) || Im(w)] (2M inputs); `encoding="phases"`
    feeds the M phase angles.
    """

    def __init__(self, antennas: int, hidden: int = 64, kind: str = "interference",
                 encoding: str = "reim", rng: np.random.Generator | None = None):
        if encoding not in ("reim", "phases"):
            raise ValueError(f"unknown encoding {encoding!r}")
        rng = rng or np.random.default_rng(0)
        n_in = 2 * antennas if encoding == "reim" else antennas
        self.net = mlp((n_in, hidden, hidden, 1), rng)
        self.antennas = antennas
        self.kind = kind
        self.encoding = encoding
        self.scale = 1.0

    def encode(self, w_batch) -> np.ndarray:
        w_batch = np.asarray(w_batch, dtype=complex)
        if self.encoding == "reim":
            return np.hstack([w_batch.real, w_batch.imag])
        return np.angle(w_batch)

    def predict_batch(self, w_batch) -> np.ndarray:
        self.net.eval()
        return self.scale * self.net.forward(self.encode(w_batch))[:, 0]

    def predict(self, w) -> float:
        return float(self.predict_batch(np.asarray(w, dtype=complex)[None, :])[0])


@dataclass
class TrainingHyper:
    """Supervised-training settings (batching, epochs, Adam schedule)."""

    lr: float
    lr_boundaries: tuple
    batch_size: int = 512
    epochs: int = 500
    seed: int = 0


def default_training_hyper(predictor) -> TrainingHyper:
    if isinstance(predictor, QuadraticFormPredictor):
        return TrainingHyper(lr=1e-1, lr_boundaries=(50, 300, 400))
    return TrainingHyper(lr=1e-2, lr_boundaries=(100, 300, 400))


@dataclass
class TrainingReport:
    final_mse: float
    epoch_losses: list


def quadratic_loss_grads(predictor: QuadraticFormPredictor, w_batch, targets):
    """MSE loss of the (normalized) quadratic form and gradients for its params.

    Gradient of ||Q^H w||^2 in Q is 2*w*(w^H Q); real and imaginary parts are
    optimized as two real matrices.
    """
    n = w_batch.shape[0]
    u = w_batch @ np.conj(predictor.factor())
    pred = (np.abs(u) ** 2).sum(axis=1) + float(predictor.offset)
    err = pred - targets
    loss = float(np.mean(err ** 2))
    dpred = 2.0 * err / n
    g = 2.0 * (w_batch.T * dpred) @ np.conj(u)
    grads = [g.real, g.imag]
    if predictor.use_offset:
        grads.append(np.asarray(np.sum(dpred)))
    return loss, grads


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        # a trailing singleton cannot feed batch norm; fold it into nothing
        if idx.size == 1 and n > 1:
            continue
        yield idx


def train_surrogate(predictor, dataset: SurrogateDataset, hyper: TrainingHyper | None = None) -> TrainingReport:
    """Fit a predictor to a dataset by minibatch Adam on mean squared error.

    Targets are trained in linear scale normalized by the dataset mean; the
    predictor keeps that scale and denormalizes on output.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    hyper = hyper or default_training_hyper(predictor)
    rng = np.random.default_rng(np.random.SeedSequence((hyper.seed, 5)))
    w_all = dataset.inputs
    powers = dataset.powers
    scale = float(powers.mean())
    if scale <= 0:
        scale = 1.0
    targets = powers / scale
    predictor.scale = scale
    n = len(dataset)

    if isinstance(predictor, QuadraticFormPredictor):
        opt = Adam(predictor.params(), lr=hyper.lr)
        epoch_losses = []
        for epoch in range(1, hyper.epochs + 1):
            opt.lr = stepwise_lr(hyper.lr, epoch, hyper.lr_boundaries)
            losses = []
            for idx in _minibatches(n, hyper.batch_size, rng):
                loss, grads = quadratic_loss_grads(predictor, w_all[idx], targets[idx])
                opt.step(predictor.params(), grads)
                if predictor.use_offset and predictor.offset < 0:
                    predictor.offset[...] = 0.0
                losses.append(loss)
            epoch_losses.append(float(np.mean(losses)))
        final = float(np.mean((predictor.predict_batch(w_all) - powers) ** 2))
        return TrainingReport(final_mse=final, epoch_losses=epoch_losses)

    if isinstance(predictor, DensePredictor):
        net = predictor.net
        x_all = predictor.encode(w_all)
        opt = Adam(net.params(), lr=hyper.lr)
        epoch_losses = []
        for epoch in range(1, hyper.epochs + 1):
            opt.lr = stepwise_lr(hyper.lr, epoch, hyper.lr_boundaries)
            losses = []
            for idx in _minibatches(n, hyper.batch_size, rng):
                net.train()
                pred = net.forward(x_all[idx])[:, 0]
                err = pred - targets[idx]
                loss = float(np.mean(err ** 2))
                net.backward((2.0 * err / err.size)[:, None])
                opt.step(net.params(), net.grads())
                losses.append(loss)
            epoch_losses.append(float(np.mean(losses)))
        final = float(np.mean((predictor.predict_batch(w_all) - powers) ** 2))
        return TrainingReport(final_mse=final, epoch_losses=epoch_losses)

    raise TypeError(f"unknown predictor type: {type(predictor).__name__}")


def nmse(predictor, dataset: SurrogateDataset) -> float:
    """Mean squared prediction error normalized by the mean squared target."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    powers = dataset.powers
    err = predictor.predict_batch(dataset.inputs) - powers
    return float(np.mean(err ** 2) / np.mean(powers ** 2))


class VirtualEnvironment:
    """Simulated environment backed by trained signal/interference predictors.

    Mirrors the actual environment's step contract; predictions stand in for
    measurements, so interacting here costs nothing on the real hardware.
    FC predictions are clamped at zero before use.
    """

    def __init__(self, signal_predictor, interference_predictor,
                 n_interferers: int = 0, codebook: PhaseCodebook | None = None):
        self.signal_predictor = signal_predictor
        self.interference_predictor = interference_predictor
        self.n_interferers = n_interferers
        self.codebook = codebook
        self.measurement_pairs = 0  # real pairs: always zero here
        self.virtual_steps = 0

    def predict_measurement(self, w) -> PowerMeasurement:
        p_s = max(self.signal_predictor.predict(w), 0.0)
        p_in = max(self.interference_predictor.predict(w), np.finfo(float).tiny)
        return PowerMeasurement(sin_power=p_s + p_in, in_power=p_in)

    def measure(self, phases) -> PowerMeasurement:
        self.virtual_steps += 1
        return self.predict_measurement(to_combiner(np.asarray(phases, dtype=float)))

    def step(self, prev_sinr: float, action) -> StepOutcome:
        action = np.asarray(action, dtype=float)
        if self.codebook is not None and not np.all(np.isin(action, self.codebook.values)):
            raise ValueError("action phases must be quantized to the codebook")
        self.virtual_steps += 1
        m = self.predict_measurement(to_combiner(action))
        sinr = estimate_sinr(m)
        reward = 1 if sinr > prev_sinr else -1
        return StepOutcome(next_state=action, reward=reward, sinr=sinr, measurement=m)

    def log_metrics(self, phases) -> dict:
        """Predicted SINR only; channel-based diagnostics are unknown here."""
        m = self.predict_measurement(to_combiner(np.asarray(phases, dtype=float)))
        row = {"sinr_db": 10.0 * np.log10(max(estimate_sinr(m), 1e-30))}
        for k in range(1, self.n_interferers + 1):
            row[f"sir{k}_db"] = np.nan
        row["inr_db"] = np.nan
        row["signal_gain_linear"] = np.nan
        return row


def virtual_step(signal_predictor, interference_predictor, prev_sinr: float, action,
                 codebook: PhaseCodebook | None = None) -> StepOutcome:
    """One step against predictors only -- no real measurement performed."""
    env = VirtualEnvironment(signal_predictor, interference_predictor, codebook=codebook)
    return env.step(prev_sinr, action)


@dataclass
class SurrogateSpec:
    """Which predictor architecture to build and with what capacity."""

    architecture: str = "model"  # "model" | "fc"
    rank_interference: int | None = None  # default: n_interferers + 2
    rank_signal: int = 2
    fc_hidden: int = 64
    fc_encoding: str = "reim"
    use_offset: bool = True
    hyper: TrainingHyper | None = None

    def __post_init__(self):
        if self.architecture not in ("model", "fc"):
            raise ValueError(f"architecture must be 'model' or 'fc', got {self.architecture!r}")


def make_predictor(spec: SurrogateSpec, kind: str, antennas: int, n_interferers: int,
                   rng: np.random.Generator):
    if spec.architecture == "model":
        if kind == "interference":
            rank = spec.rank_interference or n_interferers + 2
        else:
            rank = spec.rank_signal
        return QuadraticFormPredictor(antennas, rank, kind=kind, use_offset=spec.use_offset, rng=rng)
    return DensePredictor(antennas, hidden=spec.fc_hidden, kind=kind,
                          encoding=spec.fc_encoding, rng=rng)


@dataclass
class SwitchController:
    """Protocol knobs for alternating real and virtual interaction.

    Each round spends `n_real` measurement pairs on the actual environment,
    (re)trains the predictors unless they already validate below
    `nmse_threshold` on the fresh data, then lets the agent interact virtually
    until its best virtual SINR stagnates for `stagnation_window` iterations
    (bounded by `max_virtual_per_round`).
    """

    n_real: int = 250
    rounds: int = 4
    nmse_threshold: float = 0.05
    stagnation_window: int = 500
    max_virtual_per_round: int = 2000

    def __post_init__(self):
        if self.n_real < 2:
            raise ValueError("n_real must be >= 2")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class AssistedResult:
    best_phases: np.ndarray
    best_sinr: float  # measured on the actual environment
    log: list
    real_measurement_pairs: int
    interference_data: SurrogateDataset
    signal_data: SurrogateDataset
    retrained_rounds: list = field(default_factory=list)


def run_assisted_learning(env, agent: BeamAgent, controller: SwitchController,
                          spec: SurrogateSpec | None = None, seed: int = 0) -> AssistedResult:
    """Alternate real data acquisition with virtual interaction.

    Every real measurement lands in the interference and signal datasets; the
    final beam is re-validated against the actual environment before it is
    reported, so the returned SINR is a measured one.
    """
    spec = spec or SurrogateSpec()
    scenario = env.scenario
    m = scenario.geometry.antennas
    k = scenario.n_interferers
    rng = np.random.default_rng(np.random.SeedSequence((seed, 6)))

    d_in = SurrogateDataset("interference", m)
    d_s = SurrogateDataset("signal", m)

    def sink(w, measurement: PowerMeasurement) -> None:
        d_in.append(w, measurement.in_power)
        d_s.append(w, max(measurement.signal_power, 0.0))

    sig_pred = None
    int_pred = None
    session = LearningSession(agent)
    best_phases = None
    best_sinr = -np.inf
    candidates = []
    retrained = []

    for rnd in range(1, controller.rounds + 1):
        # The session re-measures the current beam when the environment
        # switches, so a round consumes exactly n_real measurement pairs.
        seg = session.run(env, controller.n_real - 1, phase="real", sample_sink=sink)
        if seg.best_sinr > best_sinr:
            best_sinr = seg.best_sinr
            best_phases = seg.best_phases

        fresh_in = d_in.tail(controller.n_real)
        fresh_s = d_s.tail(controller.n_real)
        accurate = (
            sig_pred is not None
            and nmse(int_pred, fresh_in) < controller.nmse_threshold
            and nmse(sig_pred, fresh_s) < controller.nmse_threshold
        )
        if not accurate:
            if sig_pred is None:
                sig_pred = make_predictor(spec, "signal", m, k, rng)
                int_pred = make_predictor(spec, "interference", m, k, rng)
            train_surrogate(int_pred, d_in, spec.hyper)
            train_surrogate(sig_pred, d_s, spec.hyper)
            retrained.append(rnd)

        venv = VirtualEnvironment(sig_pred, int_pred, n_interferers=k, codebook=scenario.codebook)
        vseg = session.run(
            venv,
            controller.max_virtual_per_round,
            phase="virtual",
            stop_after_no_improve=controller.stagnation_window,
        )
        candidates.append(vseg.best_phases)

    # Final validation: measure the virtual candidates for real.
    for phases in candidates:
        sinr = estimate_sinr(env.measure(phases))
        if sinr > best_sinr:
            best_sinr = sinr
            best_phases = phases

    return AssistedResult(
        best_phases=best_phases,
        best_sinr=best_sinr,
        log=session.log,
        real_measurement_pairs=env.measurement_pairs,
        interference_data=d_in,
        signal_data=d_s,
        retrained_rounds=retrained,
    )
