"""Shared numerical oracles and the acceptance-line collector."""

import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import betaln, gammaln, logsumexp

ACCEPTANCE_LINES: list[str] = []


def normal_marginal_oracle(y, mu0, c, a, b, ns=1500, nz=801):
    """log of the integral over (mu, tau) of prod N(y_i; mu, 1/tau) under
    N(mu; mu0, c/tau) x Gamma(tau; a/2, rate b/2), by a trapezoid rule in
    (log tau, standardized mu).  Independent of the conjugate update algebra."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    s = np.linspace(-30.0, 10.0, ns)
    tau = np.exp(s)
    z = np.linspace(-16.0, 16.0, nz)
    # centre the mu grid on the conditional posterior so a coarse grid suffices
    kappa = n + 1.0 / c
    centre = (y.sum() + mu0 / c) / kappa
    width = 1.0 / np.sqrt(tau * kappa)
    mu = centre + width[:, None] * z[None, :]
    sd = 1.0 / np.sqrt(tau)
    loglik = stats.norm.logpdf(y[None, None, :], mu[:, :, None], sd[:, None, None]).sum(-1)
    logprior_mu = stats.norm.logpdf(mu, mu0, math.sqrt(c) * sd[:, None]) + np.log(width)[:, None]
    inner = _log_trapezoid(loglik + logprior_mu, z[1] - z[0], axis=1)
    outer = inner + stats.gamma.logpdf(tau, a / 2, scale=2 / b) + s
    return float(_log_trapezoid(outer, s[1] - s[0], axis=0))


def _log_trapezoid(log_f, step, axis):
    log_f = np.moveaxis(log_f, axis, 0)
    weights = np.full(log_f.shape[0], math.log(step))
    weights[[0, -1]] -= math.log(2)
    return logsumexp(log_f + weights.reshape((-1,) + (1,) * (log_f.ndim - 1)), axis=0)


def binomial_marginal_oracle(rows, alpha, beta):
    """log of the integral over pi of prod Bin(y_i; n_i, pi) Beta(pi; alpha, beta).

    The Beta kernel's endpoint singularities are handled by QUADPACK's
    algebraic weight ``pi^(alpha-1) (1-pi)^(beta-1)``."""
    rows = [(int(y), int(n)) for y, n in rows]
    succ = sum(y for y, _ in rows)
    fail = sum(n - y for y, n in rows)
    log_choose = sum(gammaln(n + 1) - gammaln(y + 1) - gammaln(n - y + 1) for y, n in rows)
    value, _ = integrate.quad(
        lambda p: p**succ * (1 - p) ** fail,
        0.0,
        1.0,
        weight="alg",
        wvar=(alpha - 1, beta - 1),
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return math.log(value) + log_choose - betaln(alpha, beta)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line and fail the test when the criterion fails."""

    def record(number, ok, detail, elapsed=None, limit=None):
        timing = ""
        if elapsed is not None:
            within = limit is None or elapsed < limit
            timing = f" [{elapsed:.1f}s" + (f" < {limit}s" if limit else "") + "]"
            ok = ok and within
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}{timing}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
