import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Union

import numpy as np

from .channel import complex_normal, keyed_stream, sample_channels
from .errors import DimensionMismatchError, InvalidParameterError
from .estimation import UserId, lmmse_estimate, received_pilot
from .network import NetworkStatistics
from .sefficiency import spectral_efficiency

logger = logging.getLogger("mimosim")

DEFAULT_BATCH_SIZE = 250

SUMS = ("x", "x2", "abs2", "ni", "ni2", "ci", "ci2", "no", "no2", "den", "den2")


@dataclass
class MonteCarloEstimate:
    """
    Sample-mean estimate of the four SINR components of one user, with standard errors.

    CI is estimated as the received power from pilot sharers minus the signal and minus their
    uncorrelated share, so each component is directly comparable with the closed form.
    """

    user: UserId
    signal: float
    ni: float
    ci: float
    no: float
    signal_stderr: float
    ni_stderr: float
    ci_stderr: float
    no_stderr: float
    sinr: float
    sinr_stderr: float
    prelog: float
    num_realizations: int

    @property
    def se(self) -> float:
        return spectral_efficiency(self.sinr, self.prelog)

    @property
    def se_stderr(self) -> float:
        return self.prelog * self.sinr_stderr / ((1.0 + self.sinr) * math.log(2.0))


def _mean_and_stderr(total: float, total_sq: float, count: int):
    mean = total / count
    if count < 2:
        return mean, 0.0
    variance = max(total_sq / count - mean**2, 0.0) * count / (count - 1)
    return mean, math.sqrt(variance / count)


def _finalize(user: UserId, sums: Dict[str, Union[float, complex]], power: float, count: int, prelog: float):
    mean_x = sums["x"] / count
    signal = power * abs(mean_x) ** 2
    # delta method on |mean(x)|^2: the gradient direction is conj(mean(x))
    c = np.conj(mean_x)
    second = 0.5 * (np.real(c**2 * sums["x2"] / count) + abs(c) ** 2 * sums["abs2"] / count)
    projected_var = max(float(second) - abs(mean_x) ** 4, 0.0)
    if count > 1:
        projected_var *= count / (count - 1)
    signal_stderr = 2.0 * power * math.sqrt(projected_var / count)

    ni, ni_stderr = _mean_and_stderr(sums["ni"], sums["ni2"], count)
    shared, shared_stderr = _mean_and_stderr(sums["ci"], sums["ci2"], count)
    no, no_stderr = _mean_and_stderr(sums["no"], sums["no2"], count)
    received, received_stderr = _mean_and_stderr(sums["den"], sums["den2"], count)
    ci = shared - signal
    ci_stderr = math.hypot(shared_stderr, signal_stderr)
    denominator = received - signal
    denominator_stderr = math.hypot(received_stderr, signal_stderr)

    sinr = signal / denominator
    if signal > 0.0:
        sinr_stderr = sinr * math.hypot(signal_stderr / signal, denominator_stderr / denominator)
    else:
        sinr_stderr = 0.0
    return MonteCarloEstimate(
        user=user,
        signal=signal,
        ni=ni,
        ci=ci,
        no=no,
        signal_stderr=signal_stderr,
        ni_stderr=ni_stderr,
        ci_stderr=ci_stderr,
        no_stderr=no_stderr,
        sinr=sinr,
        sinr_stderr=sinr_stderr,
        prelog=prelog,
        num_realizations=count,
    )


def monte_carlo_sinr(
    network: NetworkStatistics,
    powers,
    num_realizations: int,
    seed: Union[int, np.random.SeedSequence],
    batch_size: int = DEFAULT_BATCH_SIZE,
    users: Optional[Iterable[UserId]] = None,
) -> Dict[UserId, MonteCarloEstimate]:
    """
    Estimate every expectation of the use-and-then-forget SINR by sample means over joint draws of
    channels and pilot noise, with MR combining on the LMMSE estimate.

    Draws of batch b for link (cell, user, bs) come from their own keyed stream, so the result only
    depends on (seed, num_realizations, batch_size).
    """
    if num_realizations < 1:
        raise InvalidParameterError(f"Need at least one realization, got {num_realizations}")
    if batch_size < 1:
        raise InvalidParameterError(f"Batch size must be positive, got {batch_size}")
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (network.num_users,):
        raise DimensionMismatchError(f"Expected {network.num_users} powers, got shape {powers.shape}")
    if np.any(powers < 0.0):
        raise InvalidParameterError("Data powers must be non-negative")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    config = network.pilots
    all_users = network.users()
    targets = set(all_users if users is None else users)
    link_codes = {link: code for code, link in enumerate(sorted(network.links))}
    noise_std = math.sqrt(network.noise_mw)

    sums = {u: {name: 0.0 for name in SUMS} for u in targets}
    for batch, start in enumerate(range(0, num_realizations, batch_size)):
        count = min(batch_size, num_realizations - start)
        for bs in range(network.num_cells):
            served = [u for u in all_users if u[0] == bs and u in targets]
            if not served:
                continue
            channels = {
                v: sample_channels(network.link(v, bs), keyed_stream(root, batch, link_codes[(v[0], v[1], bs)]), count)
                for v in all_users
            }
            noise_rng = keyed_stream(root, batch, len(link_codes) + bs)
            noise = noise_std * complex_normal(noise_rng, (count, network.antennas, config.tau_p))
            stacked = np.stack([channels[v] for v in all_users], axis=1)

            for u in served:
                est = network.estimator_of(u)
                y = received_pilot(channels, config, noise, u)
                combiner = lmmse_estimate(network.link(u, bs), est, y, config.pilot_power(u))
                gains = np.einsum("nm,nvm->nv", combiner.conj(), stacked)
                received = np.abs(gains) ** 2 * powers

                sharer_mask = np.array([v in est.sharers for v in all_users])
                uncorrelated = np.zeros(count)
                for v in est.sharers:
                    link = network.link(v, bs)
                    quad = np.real(np.einsum("nm,mk,nk->n", combiner.conj(), link.R, combiner))
                    uncorrelated += powers[network.index(v)] * link.beta * link.d * quad

                ni = received[:, ~sharer_mask].sum(axis=1) + uncorrelated
                ci = received[:, sharer_mask].sum(axis=1) - uncorrelated
                no = network.noise_mw * np.sum(np.abs(combiner) ** 2, axis=1)
                den = received.sum(axis=1) + no
                x = gains[:, network.index(u)]

                acc = sums[u]
                acc["x"] += np.sum(x)
                acc["x2"] += np.sum(x**2)
                acc["abs2"] += np.sum(np.abs(x) ** 2)
                for name, samples in (("ni", ni), ("ci", ci), ("no", no), ("den", den)):
                    acc[name] += np.sum(samples)
                    acc[name + "2"] += np.sum(samples**2)
        logger.debug("Monte-Carlo batch %d done (%d realizations)", batch, count)

    return {
        u: _finalize(u, sums[u], float(powers[network.index(u)]), num_realizations, config.prelog)
        for u in all_users
        if u in targets
    }
