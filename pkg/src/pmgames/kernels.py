"""Per-round simulation loops.

Every kernel consumes one pre-drawn uniform per round, so a run is a pure
function of (state arrays, outcomes, uniforms) and the compiled and
uncompiled paths produce the same trajectory.

AppleTree trees are passed as four arrays indexed by node id (the root is
node 0). Column layouts are given by the constants below.
"""

import math

import numpy as np

from pmgames._accel import optional_njit

# static integer columns
IS_LEAF, CHILD1, CHILD2, ACT1, ACT2, FULL, RULE = range(7)
N_ITREE = 7
# static float columns
RHO1P, RHO2P, BETA, GAMMA, ETA, L11, L12, L21, L22, GHI, GSPAN = range(11)
N_FTREE = 11
# leaf rules
RULE_EXP3P, RULE_PENALIZED = 0, 1
# mutable integer columns
G, TLOC = range(2)
N_ISTATE = 2
# mutable float columns
RHO_HAT, LOGW1, LOGW2 = range(3)
N_FSTATE = 3


@optional_njit(cache=True, nogil=True)
def first_share(logw1, logw2):
    """w1 / (w1 + w2) from log-weights without overflow."""
    d = logw2 - logw1
    if d > 0.0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


@optional_njit(cache=True, nogil=True)
def reset_subtree(itree, istate, fstate, node):
    while itree[node, IS_LEAF] == 0:
        istate[node, G] = 1
        istate[node, TLOC] = 1
        fstate[node, RHO_HAT] = 0.0
        node = itree[node, CHILD1]
    fstate[node, LOGW1] = 0.0
    fstate[node, LOGW2] = 0.0


@optional_njit(cache=True, nogil=True)
def leaf_choose(itree, ftree, fstate, node, u):
    """Return (reveal probability, slot) where slot 0 is the leaf's first action."""
    q = first_share(fstate[node, LOGW1], fstate[node, LOGW2])
    if itree[node, FULL] == 1:
        if u < q:
            return 1.0, 0
        return 1.0, 1
    gamma = ftree[node, GAMMA]
    p = (1.0 - gamma) * q + gamma / 2.0
    if u < p:
        return p, 0
    return p, 1


@optional_njit(cache=True, nogil=True)
def leaf_update(itree, ftree, fstate, node, p, slot, h):
    """Weight update after the leaf played ``slot`` and saw outcome ``h`` (-1 if hidden)."""
    eta = ftree[node, ETA]
    if itree[node, FULL] == 1:
        if h == 0:
            fstate[node, LOGW1] -= eta * ftree[node, L11]
            fstate[node, LOGW2] -= eta * ftree[node, L21]
        else:
            fstate[node, LOGW1] -= eta * ftree[node, L12]
            fstate[node, LOGW2] -= eta * ftree[node, L22]
    elif itree[node, RULE] == RULE_PENALIZED:
        if slot != 0:
            return
        beta = ftree[node, BETA]
        if h == 0:
            shifted = ftree[node, L11]
        else:
            shifted = ftree[node, L12]
        big1 = (shifted + beta) / p
        big2 = beta / (1.0 - p)
        fstate[node, LOGW1] -= eta * big1
        fstate[node, LOGW2] -= eta * big2
    else:
        beta = ftree[node, BETA]
        hi = ftree[node, GHI]
        span = ftree[node, GSPAN]
        if slot == 0:
            if h == 0:
                shifted = ftree[node, L11]
            else:
                shifted = ftree[node, L12]
            est1 = ((hi - shifted) / span + beta) / p
            est2 = beta / (1.0 - p)
        else:
            est1 = beta / p
            est2 = (hi / span + beta) / (1.0 - p)
        fstate[node, LOGW1] += eta * est1
        fstate[node, LOGW2] += eta * est2
    m = max(fstate[node, LOGW1], fstate[node, LOGW2])
    fstate[node, LOGW1] -= m
    fstate[node, LOGW2] -= m


@optional_njit(cache=True, nogil=True)
def internal_update(itree, ftree, istate, fstate, node, p, h):
    """Estimator update and subgame switch at one internal node; True on a reset."""
    t = istate[node, TLOC]
    ind = 1.0 if h == 1 else 0.0
    rho = (1.0 - 1.0 / t) * fstate[node, RHO_HAT] + (1.0 / t) * (ind / p)
    fstate[node, RHO_HAT] = rho
    switched = False
    if istate[node, G] == 2 and rho < ftree[node, RHO1P]:
        reset_subtree(itree, istate, fstate, itree[node, CHILD1])
        istate[node, G] = 1
        switched = True
    elif istate[node, G] == 1 and rho > ftree[node, RHO2P]:
        reset_subtree(itree, istate, fstate, itree[node, CHILD2])
        istate[node, G] = 2
        switched = True
    istate[node, TLOC] = t + 1
    return switched


@optional_njit(cache=True, nogil=True)
def appletree_run(itree, ftree, istate, fstate, outcomes, uniforms, floor, actions, reveal, root_rho):
    """Play ``len(outcomes)`` rounds; fills the output arrays and returns the root reset count."""
    n_nodes = itree.shape[0]
    path = np.empty(n_nodes, dtype=np.int64)
    resets = 0
    root_leaf = itree[0, IS_LEAF] == 1
    for step in range(outcomes.shape[0]):
        depth = 0
        node = 0
        while itree[node, IS_LEAF] == 0:
            path[depth] = node
            depth += 1
            if istate[node, G] == 1:
                node = itree[node, CHILD1]
            else:
                node = itree[node, CHILD2]
        p, slot = leaf_choose(itree, ftree, fstate, node, uniforms[step])
        if p < floor:
            raise ValueError("reveal probability fell below 1/sqrt(T)")
        if slot == 0:
            actions[step] = itree[node, ACT1]
        else:
            actions[step] = itree[node, ACT2]
        if itree[node, FULL] == 1 or slot == 0:
            h = outcomes[step]
        else:
            h = -1
        leaf_update(itree, ftree, fstate, node, p, slot, h)
        for k in range(depth - 1, -1, -1):
            v = path[k]
            if internal_update(itree, ftree, istate, fstate, v, p, h) and v == 0:
                resets += 1
        reveal[step] = p
        if root_leaf:
            root_rho[step] = np.nan
        else:
            root_rho[step] = fstate[0, RHO_HAT]
    return resets


@optional_njit(cache=True, nogil=True)
def forced_run(outcomes, uniforms, gamma_e, explore_action, chain_actions, bounds, chain_revealing, actions, reveal):
    """Forced exploration: explore w.p. ``gamma_e``, else exploit the chain action optimal at the estimate."""
    hits = 0
    for step in range(outcomes.shape[0]):
        if step == 0:
            rho = 0.0
        else:
            rho = hits / (gamma_e * step)
        pos = 0
        for b in range(bounds.shape[0]):
            if bounds[b] < rho:
                pos += 1
        if uniforms[step] < gamma_e:
            actions[step] = explore_action
            if outcomes[step] == 1:
                hits += 1
        else:
            actions[step] = chain_actions[pos]
        if chain_revealing[pos] == 1:
            reveal[step] = 1.0
        else:
            reveal[step] = gamma_e
    return hits


@optional_njit(cache=True, nogil=True)
def ewa_run(loss, eta, outcomes, uniforms, actions):
    """Exponentially weighted average forecaster over all actions (full information)."""
    n = loss.shape[0]
    logw = np.zeros(n)
    probs = np.empty(n)
    for step in range(outcomes.shape[0]):
        total = 0.0
        for i in range(n):
            probs[i] = math.exp(logw[i])
            total += probs[i]
        target = uniforms[step] * total
        acc = 0.0
        choice = n - 1
        for i in range(n):
            acc += probs[i]
            if target < acc:
                choice = i
                break
        actions[step] = choice
        j = outcomes[step]
        m = -np.inf
        for i in range(n):
            logw[i] -= eta * loss[i, j]
            if logw[i] > m:
                m = logw[i]
        for i in range(n):
            logw[i] -= m
    return 0
