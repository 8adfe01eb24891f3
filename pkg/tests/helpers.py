"""Independent oracles the tests check the implementation against.

Everything here is deliberately written on a different path than the
package code: dense matrix algebra, brute-force enumeration, or plain
Python loops.
"""

import numpy as np

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def product_kernel_oracle(x, y):
    """Closed form of the angle-embedding fidelity: prod cos^2((x_i-y_i)/2)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.prod(np.cos((x - y) / 2.0) ** 2))


def cnot_matrix(n, control, target):
    """Full 2^n CNOT matrix built by basis-index permutation."""
    dim = 2**n
    mat = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        j = k ^ (1 << target) if (k >> control) & 1 else k
        mat[j, k] = 1.0
    return mat


def density_matrix_z(state_amps, kraus_ops):
    """<Z> after applying a Kraus channel to a single-qubit pure state."""
    rho = np.outer(state_amps, np.conj(state_amps))
    out = np.zeros_like(rho)
    for k in kraus_ops:
        out += k @ rho @ k.conj().T
    return float(np.real(np.trace(PAULI_Z @ out)))


def finite_difference_grad(loss_fn, values, h=1e-4):
    """Central finite differences of a scalar function of a flat vector."""
    values = np.asarray(values, dtype=float)
    grad = np.zeros_like(values)
    for i in range(values.size):
        up, down = values.copy(), values.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (loss_fn(up) - loss_fn(down)) / (2.0 * h)
    return grad


def projected_gradient_qp(K, y_pm, C, max_iter=100_000):
    """Maximize the SVM dual by projected gradient ascent.

    Projection onto {0 <= a <= C, sum(a*y) = 0} via bisection on the
    hyperplane multiplier. Early exit when the objective stalls.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y_pm, dtype=float)
    m = y.size
    Q = (y[:, None] * y[None, :]) * K
    lip = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    step = 1.0 / lip

    def project(v):
        lo, hi = -C - np.abs(v).max(), C + np.abs(v).max()
        for _ in range(80):
            lam = 0.5 * (lo + hi)
            a = np.clip(v + lam * y, 0.0, C)
            if a @ y > 0:
                hi = lam
            else:
                lo = lam
        return np.clip(v + 0.5 * (lo + hi) * y, 0.0, C)

    def objective(a):
        return a.sum() - 0.5 * a @ Q @ a

    alpha = project(np.zeros(m))
    best = objective(alpha)
    stall = 0
    for _ in range(max_iter):
        alpha = project(alpha + step * (1.0 - Q @ alpha))
        obj = objective(alpha)
        if obj <= best + 1e-14:
            stall += 1
            if stall > 200:
                break
        else:
            stall = 0
            best = obj
    return alpha, max(best, objective(alpha))


def roc_auc_pairs(scores, labels):
    """Concordant-pair fraction with half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def tpr_at_fpr_sweep(scores, labels, cap):
    """Exhaustive threshold sweep: predict positive when score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    best = 0.0
    for t in list(np.unique(scores)) + [np.inf]:
        pred = scores >= t
        fp = int(np.sum(pred & (labels == 0)))
        tp = int(np.sum(pred & (labels == 1)))
        if fp / n_neg <= cap and tp / n_pos > best:
            best = tp / n_pos
    return best


def disagreement_loop(qnn_labels, qsvm_labels):
    count = 0
    for a, b in zip(qnn_labels, qsvm_labels):
        if a != b:
            count += 1
    return count / len(qnn_labels)


def logistic_regression_accuracy(X, y, lr=0.5, steps=2000):
    """Plain gradient-descent logistic regression; returns training accuracy."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(steps):
        p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
        w -= lr * (X.T @ (p - y)) / y.size
        b -= lr * float(np.mean(p - y))
    p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
    return float(np.mean((p >= 0.5) == (y == 1)))
