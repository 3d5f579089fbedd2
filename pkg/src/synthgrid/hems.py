"""Home energy management environment and tabular Q-learning agent.

Each quarter-hour the agent picks q in {-1, 0, 1}: charge, idle, or
discharge the battery at fixed power.  Net power
P_total = P_ch*q + P_pv - P_load is sold when positive and bought when
negative, and the reward is that step's cash flow (power * 0.25 h * tariff).
SOC bounds are hard constraints: infeasible actions are coerced to idle
before the dynamics run.

Protocol: offline episodes on synthetic days train the Q-table, then the
online test replays real days greedily with no further updates.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, ParameterError, SchemaError, ValidationError
from .ingest import DailyProfileSet, SLOTS_PER_DAY, denormalize

ACTIONS = (-1, 0, 1)          # charge / idle / discharge
_SOC_EPS = 1e-12


@dataclass(frozen=True)
class PriceSchedule:
    """Per-slot buy and sell tariffs (currency per kWh, 96 slots)."""

    buy: np.ndarray
    sell: np.ndarray

    def __post_init__(self):
        buy = np.asarray(self.buy, dtype=np.float64)
        sell = np.asarray(self.sell, dtype=np.float64)
        if buy.shape != (SLOTS_PER_DAY,) or sell.shape != (SLOTS_PER_DAY,):
            raise ValidationError(f"price schedule needs {SLOTS_PER_DAY} buy and sell entries")
        if np.any(buy <= 0) or np.any(sell <= 0):
            raise ValidationError("all prices must be positive")
        if np.any(sell > buy):
            raise ValidationError("sell price must not exceed buy price in any slot")
        object.__setattr__(self, "buy", buy)
        object.__setattr__(self, "sell", sell)

    @classmethod
    def two_tier_default(cls) -> "PriceSchedule":
        """Artifact default: peak 07:00-22:00 buy 0.20 / sell 0.10, off-peak
        buy 0.10 / sell 0.05 per kWh."""
        buy = np.full(SLOTS_PER_DAY, 0.10)
        sell = np.full(SLOTS_PER_DAY, 0.05)
        peak = slice(7 * 4, 22 * 4)
        buy[peak] = 0.20
        sell[peak] = 0.10
        return cls(buy=buy, sell=sell)

    def to_json(self, path) -> None:
        pairs = [[float(b), float(s)] for b, s in zip(self.buy, self.sell)]
        Path(path).write_text(json.dumps(pairs, indent=0, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "PriceSchedule":
        pairs = json.loads(Path(path).read_text())
        if len(pairs) != SLOTS_PER_DAY:
            raise SchemaError(f"price schedule must have {SLOTS_PER_DAY} pairs, got {len(pairs)}")
        arr = np.asarray(pairs, dtype=np.float64)
        return cls(buy=arr[:, 0], sell=arr[:, 1])


def _default_prices():
    return PriceSchedule.two_tier_default()


@dataclass(frozen=True)
class HemsConfig:
    """Battery, learning, and discretization parameters."""

    p_ch_kw: float = 4.0          # fixed ESS charge/discharge power
    capacity_kwh: float = 16.0
    soc_min: float = 0.1
    soc_max: float = 0.9
    soc_init: float = 0.1
    dt_hours: float = 0.25
    alpha: float = 0.8            # learning rate
    gamma_d: float = 0.7          # reward discount factor
    epsilon: float = 0.05
    epsilon_decay: bool = False   # linearly anneal epsilon to 0 across episodes
    episodes: int = 5000
    soc_bins: int = 10
    pv_bins: int = 8
    load_bins: int = 8
    time_bins: int = 24
    pv_range: tuple | None = None     # (lo, hi) in kW; resolved from data if None
    load_range: tuple | None = None
    prices: PriceSchedule = field(default_factory=_default_prices)

    def __post_init__(self):
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise ParameterError("need 0 <= soc_min < soc_max <= 1")
        if not (self.soc_min <= self.soc_init <= self.soc_max):
            raise ParameterError("soc_init must lie within [soc_min, soc_max]")
        if self.p_ch_kw <= 0 or self.capacity_kwh <= 0 or self.dt_hours <= 0:
            raise ParameterError("p_ch_kw, capacity_kwh, and dt_hours must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError("alpha must be in (0, 1]")
        if not (0.0 <= self.gamma_d < 1.0):
            raise ParameterError("gamma_d must be in [0, 1)")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ParameterError("epsilon must be in [0, 1]")
        if self.episodes < 1:
            raise ParameterError("episodes must be >= 1")
        if min(self.soc_bins, self.pv_bins, self.load_bins, self.time_bins) < 1:
            raise ParameterError("bin counts must be >= 1")

    @property
    def n_states(self) -> int:
        return self.soc_bins * self.pv_bins * self.load_bins * self.time_bins

    @property
    def soc_step(self) -> float:
        """SOC change of one charge/discharge step."""
        return self.p_ch_kw * self.dt_hours / self.capacity_kwh


@dataclass(frozen=True)
class HemsState:
    soc: float
    pv_kw: float
    load_kw: float       # smart home load + EV charging load
    t_index: int         # 0..95

    def __post_init__(self):
        if self.pv_kw < 0 or self.load_kw < 0:
            raise ValidationError("powers must be non-negative")
        if not 0 <= self.t_index < SLOTS_PER_DAY:
            raise ValidationError(f"t_index must be in [0, {SLOTS_PER_DAY})")


@dataclass(frozen=True)
class StepLog:
    t_index: int
    soc: float
    pv_kw: float
    load_kw: float
    action_requested: int
    action: int          # after feasibility coercion
    p_ess_kw: float
    p_total_kw: float
    price: float
    reward: float


@dataclass
class HemsEpisodeLog:
    steps: list
    cumulative_profit: float

    @classmethod
    def from_steps(cls, steps) -> "HemsEpisodeLog":
        return cls(steps=list(steps), cumulative_profit=float(sum(s.reward for s in steps)))


class QTable:
    """State-action values indexed by (soc, pv, load, time) bin tuple and
    action in {-1, 0, 1}.  Carries the resolved config so the online test
    discretizes exactly as training did."""

    def __init__(self, config: HemsConfig):
        if config.pv_range is None or config.load_range is None:
            raise ContractError("QTable needs a config with resolved pv/load ranges")
        self.config = config
        self.q = np.zeros((config.n_states, len(ACTIONS)))

    def max_value(self, index: int) -> float:
        return float(self.q[index].max())


def coerce_action(soc: float, action: int, config: HemsConfig) -> int:
    """Idle instead of any charge/discharge that would leave the SOC bounds."""
    if action == 1 and soc - config.soc_step < config.soc_min - _SOC_EPS:
        return 0
    if action == -1 and soc + config.soc_step > config.soc_max + _SOC_EPS:
        return 0
    return action


def step(
    state: HemsState,
    action: int,
    prices: PriceSchedule,
    config: HemsConfig,
    next_pv_kw: float = 0.0,
    next_load_kw: float = 0.0,
):
    """One environment transition.  Returns (next_state, reward, StepLog).

    The caller supplies the next slot's exogenous PV/load (zero by default,
    e.g. at a horizon end).
    """
    if action not in ACTIONS:
        raise ParameterError(f"action must be one of {ACTIONS}, got {action}")
    t = state.t_index
    acted = coerce_action(state.soc, action, config)
    p_ess = config.p_ch_kw * acted
    p_total = p_ess + state.pv_kw - state.load_kw
    price = prices.sell[t] if p_total > 0 else prices.buy[t]
    reward = p_total * config.dt_hours * price
    soc_next = state.soc - p_ess * config.dt_hours / config.capacity_kwh
    soc_next = min(max(soc_next, config.soc_min), config.soc_max)

    next_state = HemsState(
        soc=soc_next,
        pv_kw=next_pv_kw,
        load_kw=next_load_kw,
        t_index=(t + 1) % SLOTS_PER_DAY,
    )
    log = StepLog(
        t_index=t,
        soc=state.soc,
        pv_kw=state.pv_kw,
        load_kw=state.load_kw,
        action_requested=action,
        action=acted,
        p_ess_kw=p_ess,
        p_total_kw=p_total,
        price=float(price),
        reward=float(reward),
    )
    return next_state, float(reward), log


def _bin_of(value: float, lo: float, hi: float, n: int) -> int:
    if hi <= lo:
        return 0
    b = int((value - lo) / (hi - lo) * n)
    return min(max(b, 0), n - 1)


def discretize(state: HemsState, config: HemsConfig) -> int:
    """Uniform binning of (soc, pv, load, time) to one flat table index.

    Out-of-range powers clamp to the edge bins; the flat index is bijective
    with the bin tuple.
    """
    if config.pv_range is None or config.load_range is None:
        raise ContractError("config pv_range/load_range must be resolved before discretizing")
    soc_b = _bin_of(state.soc, config.soc_min, config.soc_max, config.soc_bins)
    pv_b = _bin_of(state.pv_kw, config.pv_range[0], config.pv_range[1], config.pv_bins)
    load_b = _bin_of(state.load_kw, config.load_range[0], config.load_range[1], config.load_bins)
    time_b = state.t_index * config.time_bins // SLOTS_PER_DAY
    return (
        (soc_b * config.pv_bins + pv_b) * config.load_bins + load_b
    ) * config.time_bins + time_b


def q_update(
    qtable: QTable,
    index: int,
    action: int,
    reward: float,
    next_index: int | None,
    config: HemsConfig,
) -> QTable:
    """Bellman update; next_index None marks a terminal step (no bootstrap)."""
    col = action + 1
    q_old = qtable.q[index, col]
    bootstrap = 0.0 if next_index is None else qtable.q[next_index].max()
    qtable.q[index, col] = q_old + config.alpha * (reward + config.gamma_d * bootstrap - q_old)
    return qtable


def select_action(qtable: QTable, index: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the three actions; greedy ties break toward the
    lowest action value (charge before idle before discharge)."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(len(ACTIONS))) - 1
    return int(np.argmax(qtable.q[index])) - 1


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------

def run_day_greedy(
    qtable: QTable,
    pv_day_kw: np.ndarray,
    load_day_kw: np.ndarray,
    prices: PriceSchedule,
    config: HemsConfig,
) -> HemsEpisodeLog:
    """Execute one day greedily (epsilon = 0), fully logged, no updates."""
    state = HemsState(
        soc=config.soc_init, pv_kw=float(pv_day_kw[0]), load_kw=float(load_day_kw[0]), t_index=0
    )
    steps = []
    for t in range(SLOTS_PER_DAY):
        index = discretize(state, config)
        action = int(np.argmax(qtable.q[index])) - 1
        nxt = t + 1
        next_pv = float(pv_day_kw[nxt]) if nxt < SLOTS_PER_DAY else 0.0
        next_load = float(load_day_kw[nxt]) if nxt < SLOTS_PER_DAY else 0.0
        state, _, log = step(state, action, prices, config, next_pv, next_load)
        steps.append(log)
    return HemsEpisodeLog.from_steps(steps)


def _run_episode(
    qtable: QTable,
    pv_day_kw: np.ndarray,
    load_day_kw: np.ndarray,
    config: HemsConfig,
    rng: np.random.Generator,
    epsilon: float,
    learn: bool,
) -> float:
    """Tight training loop: same dynamics as step(), no per-step objects."""
    q = qtable.q
    buy = [float(v) for v in config.prices.buy]
    sell = [float(v) for v in config.prices.sell]
    p_ch, dt, cap = config.p_ch_kw, config.dt_hours, config.capacity_kwh
    soc_min, soc_max, soc_step = config.soc_min, config.soc_max, config.soc_step
    alpha, gamma_d = config.alpha, config.gamma_d

    pv_lo, pv_hi = config.pv_range
    load_lo, load_hi = config.load_range
    pv_b = [_bin_of(float(v), pv_lo, pv_hi, config.pv_bins) for v in pv_day_kw]
    load_b = [_bin_of(float(v), load_lo, load_hi, config.load_bins) for v in load_day_kw]
    time_b = [t * config.time_bins // SLOTS_PER_DAY for t in range(SLOTS_PER_DAY)]
    pvb_n, loadb_n, timeb_n = config.pv_bins, config.load_bins, config.time_bins
    soc_span = soc_max - soc_min

    pv_kw = [float(v) for v in pv_day_kw]
    load_kw = [float(v) for v in load_day_kw]
    soc_bins_n = config.soc_bins

    soc = config.soc_init
    total = 0.0
    for t in range(SLOTS_PER_DAY):
        soc_bin = int((soc - soc_min) / soc_span * soc_bins_n)
        if soc_bin < 0:
            soc_bin = 0
        elif soc_bin >= soc_bins_n:
            soc_bin = soc_bins_n - 1
        index = ((soc_bin * pvb_n + pv_b[t]) * loadb_n + load_b[t]) * timeb_n + time_b[t]

        row = q[index]
        if epsilon > 0 and rng.random() < epsilon:
            action = int(rng.integers(3)) - 1
        else:
            # manual argmax, first maximum wins (charge < idle < discharge)
            q0, q1, q2 = row[0], row[1], row[2]
            if q0 >= q1 and q0 >= q2:
                action = -1
            elif q1 >= q2:
                action = 0
            else:
                action = 1

        acted = action
        if acted == 1 and soc - soc_step < soc_min - _SOC_EPS:
            acted = 0
        elif acted == -1 and soc + soc_step > soc_max + _SOC_EPS:
            acted = 0
        p_ess = p_ch * acted
        p_total = p_ess + pv_kw[t] - load_kw[t]
        price = sell[t] if p_total > 0 else buy[t]
        reward = p_total * dt * price
        soc_next = soc - p_ess * dt / cap
        soc_next = min(max(soc_next, soc_min), soc_max)
        total += reward

        if learn:
            if t + 1 < SLOTS_PER_DAY:
                nsoc_bin = int((soc_next - soc_min) / soc_span * soc_bins_n)
                if nsoc_bin < 0:
                    nsoc_bin = 0
                elif nsoc_bin >= soc_bins_n:
                    nsoc_bin = soc_bins_n - 1
                next_index = (
                    (nsoc_bin * pvb_n + pv_b[t + 1]) * loadb_n + load_b[t + 1]
                ) * timeb_n + time_b[t + 1]
                nrow = q[next_index]
                bootstrap = nrow[0]
                if nrow[1] > bootstrap:
                    bootstrap = nrow[1]
                if nrow[2] > bootstrap:
                    bootstrap = nrow[2]
            else:
                bootstrap = 0.0
            # Credit the requested action: an infeasible choice behaves like
            # idle, and its Q-value learns exactly that.
            col = action + 1
            q_old = row[col]
            row[col] = q_old + alpha * (reward + gamma_d * bootstrap - q_old)
        soc = soc_next
    return total


def _channel_days_kw(profile_set: DailyProfileSet) -> np.ndarray:
    raw = denormalize(profile_set) if profile_set.normalized else profile_set
    return raw.profiles / 1000.0


def _combined_days(datasets) -> tuple[np.ndarray, np.ndarray]:
    """Cycle unequal channel day counts and fold EV into the load channel."""
    for key in ("load", "pv", "ev"):
        if key not in datasets:
            raise ParameterError(f"missing channel {key!r}")
        if datasets[key].n_days == 0:
            raise ParameterError(f"channel {key!r} has no days")
    load = _channel_days_kw(datasets["load"])
    pv = _channel_days_kw(datasets["pv"])
    ev = _channel_days_kw(datasets["ev"])
    n = max(len(load), len(pv), len(ev))
    pv_days = np.stack([pv[d % len(pv)] for d in range(n)])
    load_days = np.stack([load[d % len(load)] + ev[d % len(ev)] for d in range(n)])
    return pv_days, load_days


def resolve_ranges(config: HemsConfig, pv_days: np.ndarray, load_days: np.ndarray) -> HemsConfig:
    resolved = config
    if resolved.pv_range is None:
        resolved = replace(resolved, pv_range=(0.0, float(pv_days.max())))
    if resolved.load_range is None:
        resolved = replace(resolved, load_range=(0.0, float(load_days.max())))
    return resolved


def train_offline(synthetic, config: HemsConfig, seed: int):
    """Phase 1: train the Q-table over `episodes` sampled synthetic days.

    synthetic maps channel name -> DailyProfileSet for "load", "pv", "ev".
    Returns (QTable, per-episode cumulative reward curve).
    """
    pv_days, load_days = _combined_days(synthetic)
    config = resolve_ranges(config, pv_days, load_days)
    qtable = QTable(config)
    rng = np.random.default_rng(seed)
    n_days = len(pv_days)

    curve = np.zeros(config.episodes)
    for episode in range(config.episodes):
        if config.epsilon_decay and config.episodes > 1:
            eps = config.epsilon * (1.0 - episode / (config.episodes - 1))
        else:
            eps = config.epsilon
        d = int(rng.integers(n_days))
        curve[episode] = _run_episode(
            qtable, pv_days[d], load_days[d], config, rng, eps, learn=True
        )
    return qtable, curve


def test_online(qtable: QTable, real, config: HemsConfig | None = None):
    """Phase 2: greedy day-by-day replay on real data, no updates.
    Returns one HemsEpisodeLog per day."""
    config = config if config is not None else qtable.config
    pv_days, load_days = _combined_days(real)
    if config.pv_range is None or config.load_range is None:
        config = replace(
            config, pv_range=qtable.config.pv_range, load_range=qtable.config.load_range
        )
    logs = []
    for d in range(len(pv_days)):
        logs.append(run_day_greedy(qtable, pv_days[d], load_days[d], config.prices, config))
    return logs


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_qtable(qtable: QTable, bin_path) -> None:
    """Float32 dump plus a JSON sidecar with the bin metadata."""
    bin_path = Path(bin_path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    arr = qtable.q.astype("<f4")
    header = struct.pack("<II", arr.shape[0], arr.shape[1])
    bin_path.write_bytes(header + arr.tobytes())
    cfg = qtable.config
    meta = {
        "soc_bins": cfg.soc_bins,
        "pv_bins": cfg.pv_bins,
        "load_bins": cfg.load_bins,
        "time_bins": cfg.time_bins,
        "soc_min": cfg.soc_min,
        "soc_max": cfg.soc_max,
        "pv_range": list(cfg.pv_range),
        "load_range": list(cfg.load_range),
        "actions": list(ACTIONS),
        "p_ch_kw": cfg.p_ch_kw,
        "capacity_kwh": cfg.capacity_kwh,
    }
    bin_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_qtable(bin_path, config: HemsConfig) -> QTable:
    """Rebuild a QTable; bin metadata from the sidecar overrides the config's
    binning so indices stay consistent with training."""
    bin_path = Path(bin_path)
    meta = json.loads(bin_path.with_suffix(".json").read_text())
    config = replace(
        config,
        soc_bins=meta["soc_bins"],
        pv_bins=meta["pv_bins"],
        load_bins=meta["load_bins"],
        time_bins=meta["time_bins"],
        soc_min=meta["soc_min"],
        soc_max=meta["soc_max"],
        pv_range=tuple(meta["pv_range"]),
        load_range=tuple(meta["load_range"]),
    )
    blob = bin_path.read_bytes()
    n_states, n_actions = struct.unpack("<II", blob[:8])
    arr = np.frombuffer(blob, dtype="<f4", offset=8).reshape(n_states, n_actions)
    qtable = QTable(config)
    if arr.shape != qtable.q.shape:
        raise SchemaError(
            f"qtable shape {arr.shape} does not match config bins {qtable.q.shape}"
        )
    qtable.q = arr.astype(np.float64)
    return qtable
