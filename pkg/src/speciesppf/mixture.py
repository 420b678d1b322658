"""Scikit-learn style wrapper around the collapsed Gibbs sampler."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._random import as_seed_sequence
from .gibbs import (
    BinomialModelConfig,
    NormalModelConfig,
    PartitionPriorSpec,
    make_kernel,
    run_chain,
    summarize,
)
from .weights import LogisticNormalWeights, WeightModel, weight_model_from_dict


class SpeciesSamplingMixture(ClusterMixin, BaseEstimator):
    """Conjugate mixture with a species sampling partition prior.

    Parameters
    ----------
    likelihood : {"normal", "binomial"}
        ``"normal"`` expects one column of observations; ``"binomial"`` expects
        two columns ``(successes, trials)``.
    prior : {"dp", "ssm"}
        Dirichlet process with mass ``theta``, or a weight-defined model
        given by ``weights`` (a :class:`WeightModel`, a dict accepted by
        :func:`weight_model_from_dict`, or ``None`` for the default
        logistic-normal model).
    ppf_draws : int
        Monte Carlo size for each PPF estimate under ``prior="ssm"``.
    mu0, c, a_ig, b_ig : float
        Normal-gamma hyperparameters.
    alpha, beta : float
        Beta prior for the binomial model.
    n_iter, burn_in : int
        Sweeps run and sweeps discarded.
    random_state : int or None

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Highest-scoring visited partition, labels in order of appearance.
    cocluster_ : ndarray of shape (n_samples, n_samples)
    k_distribution_, nmax_distribution_ : ndarray of shape (n_samples + 1,)
    chain_ : PartitionChain
    summary_ : PosteriorSummary
    """

    def __init__(
        self,
        likelihood="normal",
        prior="dp",
        theta=2.83,
        weights=None,
        ppf_draws=1000,
        mu0=0.0,
        c=10.0,
        a_ig=4.0,
        b_ig=4.0,
        alpha=0.15,
        beta=0.85,
        n_iter=1000,
        burn_in=100,
        random_state=0,
    ):
        self.likelihood = likelihood
        self.prior = prior
        self.theta = theta
        self.weights = weights
        self.ppf_draws = ppf_draws
        self.mu0 = mu0
        self.c = c
        self.a_ig = a_ig
        self.b_ig = b_ig
        self.alpha = alpha
        self.beta = beta
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.random_state = random_state

    def _model_config(self):
        if self.likelihood == "normal":
            return NormalModelConfig(self.mu0, self.c, self.a_ig, self.b_ig)
        if self.likelihood == "binomial":
            return BinomialModelConfig(self.alpha, self.beta)
        raise ValueError(f"likelihood must be 'normal' or 'binomial', got {self.likelihood!r}")

    def _prior_spec(self) -> PartitionPriorSpec:
        if self.prior == "dp":
            return PartitionPriorSpec.dp(self.theta)
        if self.prior == "ssm":
            model = self.weights
            if model is None:
                model = LogisticNormalWeights()
            elif isinstance(model, dict):
                model = weight_model_from_dict(model)
            elif not isinstance(model, WeightModel):
                raise ValueError("weights must be a WeightModel, a dict or None")
            return PartitionPriorSpec.ssm(model, self.ppf_draws)
        raise ValueError(f"prior must be 'dp' or 'ssm', got {self.prior!r}")

    def _validate(self, X, reset):
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        width = 1 if self.likelihood == "normal" else 2
        if X.shape[1] != width:
            raise ValueError(f"{self.likelihood} likelihood expects {width} column(s), got {X.shape[1]}")
        if self.likelihood == "binomial":
            if np.any(X != np.round(X)):
                raise ValueError("binomial counts must be integers")
            X = X.astype(int)
        if reset:
            self.n_features_in_ = X.shape[1]
        return X

    def _data(self, X):
        return X[:, 0] if self.likelihood == "normal" else X

    def fit(self, X, y=None):
        cfg = self._model_config()
        prior = self._prior_spec()
        X = self._validate(X, reset=True)
        chain = run_chain(self._data(X), cfg, prior, self.n_iter, self.burn_in, self.random_state)
        self.chain_ = chain
        self.summary_ = summarize(chain, predictive_grid=False)
        best = int(np.argmax(chain.log_scores))
        self.labels_ = np.array(chain.states[best])
        self.cocluster_ = self.summary_.cocluster
        self.k_distribution_ = self.summary_.k_dist
        self.nmax_distribution_ = self.summary_.nmax_dist
        self._train = X
        return self

    def _log_joint(self, X):
        """``log p_j(n) + log m(x | cluster j)`` for each row and ``j = 0..k``.

        Column ``k`` is the new-cluster option.
        """
        cfg = self._model_config()
        kernel = make_kernel(cfg)
        items = self.chain_.data
        labels = self.labels_
        k = labels.max() + 1
        sizes = [int((labels == j).sum()) for j in range(k)]
        rule = self._prior_spec().ppf(as_seed_sequence(self.random_state, 3))
        log_p = np.log(np.maximum(rule(sizes), 1e-300))
        stats_ = [kernel.stats_of([items[i] for i in np.flatnonzero(labels == j)]) for j in range(k)]
        stats_.append(kernel.empty)
        base = np.array([kernel.log_marginal(s) for s in stats_])
        new = [float(v) for v in X[:, 0]] if self.likelihood == "normal" else [tuple(map(int, r)) for r in X]
        out = np.empty((len(new), k + 1))
        for r, item in enumerate(new):
            for j, s in enumerate(stats_):
                out[r, j] = log_p[j] + kernel.log_marginal(kernel.add(s, item)) - base[j]
        return out

    def predict(self, X):
        """Most probable cluster of ``labels_`` for each new row; ``k`` means a new cluster."""
        check_is_fitted(self, "labels_")
        X = self._validate(X, reset=False)
        return np.argmax(self._log_joint(X), axis=1)

    def predict_proba(self, X):
        check_is_fitted(self, "labels_")
        X = self._validate(X, reset=False)
        joint = self._log_joint(X)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def score_samples(self, X):
        """Log predictive density (normal) or mass (binomial) given ``labels_``."""
        check_is_fitted(self, "labels_")
        X = self._validate(X, reset=False)
        return logsumexp(self._log_joint(X), axis=1)

    def predictive_density(self, grid=None):
        """Posterior mean predictive density averaged over all stored states."""
        check_is_fitted(self, "chain_")
        if self.likelihood != "normal":
            raise ValueError("predictive densities are available for the normal model only")
        summary = summarize(self.chain_, predictive_grid=grid)
        return summary.predictive

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_
