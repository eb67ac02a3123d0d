"""Feed-forward policy/value networks with multi-head categorical outputs.

Networks are plain numpy, double precision, with hand-written backprop so
that gradients can be checked against finite differences. The three
low-level controllers share one :class:`Trunk` object; the commander owns
its own.

Checkpoint byte layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"ACPOLICY"
    8       4     uint32 format version (1)
    12      4     uint32 header length H
    16      H     UTF-8 JSON header (role, obs_width, head_spec, trunk_sizes,
                  head_sizes, trunk_id, tags, shapes, n_params, sha256)
    16+H    8*n   float64 parameters, C order, in ``parameters()`` order
"""

import hashlib
import json
import struct

import numpy as np

from .errors import CheckpointError, DivergenceError, InvalidActionError, InvalidMaskError, ShapeError

LOW_LEVEL_ROLES = ("attack", "engage", "defend")
COMMANDER_ROLE = "commander"
ROLES = LOW_LEVEL_ROLES + (COMMANDER_ROLE,)

MAGIC = b"ACPOLICY"
FORMAT_VERSION = 1
MASKED_LOGIT = -1e30


def orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    w = q if n_in >= n_out else q.T
    return gain * w[:n_in, :n_out]


def dense(rng, n_in, n_out, gain):
    return [orthogonal(rng, n_in, n_out, gain), np.zeros(n_out)]


class Trunk:
    """Hidden tanh layers that several heads may reference."""

    def __init__(self, layers, trunk_id="trunk"):
        self.layers = layers
        self.trunk_id = trunk_id

    @classmethod
    def build(cls, obs_width, sizes=(64, 64), rng=None, trunk_id="trunk"):
        rng = np.random.default_rng(0) if rng is None else rng
        layers = []
        n_in = obs_width
        for n in sizes:
            layers.append(dense(rng, n_in, n, np.sqrt(2.0)))
            n_in = n
        return cls(layers, trunk_id)

    @property
    def sizes(self):
        return [w.shape[1] for w, _ in self.layers]

    @property
    def in_width(self):
        return self.layers[0][0].shape[0]

    def parameters(self):
        return [p for layer in self.layers for p in layer]


class PolicyNet:
    """Trunk, optional per-role hidden layers, categorical logits and a value."""

    def __init__(self, role, trunk, head_layers, pi_out, v_out, head_spec, tags=None):
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        self.role = role
        self.trunk = trunk
        self.head_layers = head_layers
        self.pi_out = pi_out
        self.v_out = v_out
        self.head_spec = tuple(int(n) for n in head_spec)
        self.tags = dict(tags or {})
        self.frozen = False
        self.trunk_frozen = False
        if pi_out[0].shape[1] != sum(self.head_spec):
            raise ShapeError("policy output width does not match head_spec")

    @classmethod
    def build(cls, role, obs_width, head_spec, trunk=None, trunk_sizes=(64, 64),
              head_sizes=(), rng=None, tags=None):
        rng = np.random.default_rng(0) if rng is None else rng
        if trunk is None:
            trunk = Trunk.build(obs_width, trunk_sizes, rng, trunk_id=f"{role}-trunk")
        elif trunk.in_width != obs_width:
            raise ShapeError("shared trunk input width mismatch")
        n_in = trunk.sizes[-1]
        head_layers = []
        for n in head_sizes:
            head_layers.append(dense(rng, n_in, n, np.sqrt(2.0)))
            n_in = n
        pi_out = dense(rng, n_in, sum(head_spec), 0.01)
        v_out = dense(rng, n_in, 1, 1.0)
        return cls(role, trunk, head_layers, pi_out, v_out, head_spec, tags)

    # -- structure ------------------------------------------------------

    @property
    def obs_width(self):
        return self.trunk.in_width

    @property
    def layer_sizes(self):
        return [self.obs_width] + self.trunk.sizes + [w.shape[1] for w, _ in self.head_layers]

    @property
    def n_trunk_params(self):
        return 2 * len(self.trunk.layers)

    def hidden_layers(self):
        return self.trunk.layers + self.head_layers

    def parameters(self):
        """Parameter arrays (live references): trunk, head layers, policy out, value out."""
        out = self.trunk.parameters()
        for layer in self.head_layers:
            out.extend(layer)
        out.extend(self.pi_out)
        out.extend(self.v_out)
        return out

    def flat_parameters(self):
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat):
        i = 0
        for p in self.parameters():
            n = p.size
            p[...] = flat[i:i + n].reshape(p.shape)
            i += n

    def digest(self):
        return hashlib.sha256(self.flat_parameters().astype("<f8").tobytes()).hexdigest()

    def head_slices(self):
        out, start = [], 0
        for n in self.head_spec:
            out.append(slice(start, start + n))
            start += n
        return out

    # -- forward / backward ---------------------------------------------

    def forward(self, obs, return_cache=False):
        """Logits ``(B, sum(head_spec))`` and values ``(B,)``; 1-D input gives unbatched output."""
        x = np.asarray(obs, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.obs_width:
            raise ShapeError(f"observation width {x.shape[1]} != network input {self.obs_width}")
        acts = [x]
        h = x
        for w, b in self.hidden_layers():
            h = np.tanh(h @ w + b)
            acts.append(h)
        logits = h @ self.pi_out[0] + self.pi_out[1]
        value = (h @ self.v_out[0] + self.v_out[1])[:, 0]
        if not (np.isfinite(logits).all() and np.isfinite(value).all()):
            raise DivergenceError(f"{self.role} network produced non-finite outputs")
        if single:
            logits, value = logits[0], value[0]
        if return_cache:
            return logits, value, acts
        return logits, value

    def backward(self, acts, dlogits, dvalue):
        """Gradients for every array of :meth:`parameters`, same order."""
        h = acts[-1]
        dvalue = np.asarray(dvalue, dtype=np.float64).reshape(-1, 1)
        g_pi = [h.T @ dlogits, dlogits.sum(axis=0)]
        g_v = [h.T @ dvalue, dvalue[:, 0].sum(axis=0, keepdims=True)]
        dh = dlogits @ self.pi_out[0].T + dvalue @ self.v_out[0].T
        grads = []
        layers = self.hidden_layers()
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            out = acts[i + 1]
            dz = dh * (1.0 - out * out)
            grads.append([acts[i].T @ dz, dz.sum(axis=0)])
            if i:
                dh = dz @ w.T
        grads.reverse()
        flat = [g for pair in grads for g in pair]
        return flat + g_pi + g_v


# -- masked multi-head categoricals -------------------------------------


class ActionMask:
    """Per-head boolean vectors of permitted actions."""

    def __init__(self, heads):
        self.heads = [np.asarray(h, dtype=bool) for h in heads]
        for i, h in enumerate(self.heads):
            if not h.any():
                raise InvalidMaskError(f"head {i} has every action masked")

    @classmethod
    def allow_all(cls, head_spec):
        return cls([np.ones(n, dtype=bool) for n in head_spec])

    def flat(self):
        return np.concatenate(self.heads)


def low_level_mask(rockets_available):
    """Mask for the low-level heads; the rocket trigger is locked without rockets."""
    heads = [np.ones(13, bool), np.ones(9, bool), np.ones(2, bool), np.ones(2, bool)]
    if not rockets_available:
        heads[3] = np.array([True, False])
    return ActionMask(heads)


def _flat_mask(mask, head_spec, batch):
    total = sum(head_spec)
    if mask is None:
        return np.ones((batch, total), dtype=bool)
    if isinstance(mask, ActionMask):
        mask = mask.flat()
    m = np.asarray(mask, dtype=bool)
    if m.ndim == 1:
        m = np.broadcast_to(m, (batch, total))
    if m.shape != (batch, total):
        raise ShapeError("mask shape does not match logits")
    return m


def head_log_probs(logits, head_spec, mask=None):
    """Masked log-softmax per head for batched logits; returns a list of ``(B, n)`` arrays."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    m = _flat_mask(mask, head_spec, z.shape[0])
    out, start = [], 0
    for n in head_spec:
        zh = z[:, start:start + n]
        mh = m[:, start:start + n]
        if not mh.any(axis=1).all():
            raise InvalidMaskError("a head has every action masked")
        zh = np.where(mh, zh, MASKED_LOGIT)
        zh = zh - zh.max(axis=1, keepdims=True)
        lse = np.log(np.exp(zh).sum(axis=1, keepdims=True))
        out.append(zh - lse)
        start += n
    return out


def sample(logits, mask, rng, head_spec=None):
    """Sample every head independently.

    Returns ``(actions, log_prob)``: integer array ``(B, heads)`` and the joint
    log-probability ``(B,)``. 1-D logits give unbatched results.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if head_spec is None:
        head_spec = (z.shape[-1],)
    logps = head_log_probs(z, head_spec, mask)
    batch = logps[0].shape[0]
    u = rng.random((batch, len(head_spec)))
    actions = np.empty((batch, len(head_spec)), dtype=np.int64)
    total = np.zeros(batch)
    for k, lp in enumerate(logps):
        cdf = np.cumsum(np.exp(lp), axis=1)
        idx = (u[:, k:k + 1] >= cdf).sum(axis=1)
        # floating cdf can end just below 1; never land on a masked entry
        idx = np.minimum(idx, lp.shape[1] - 1)
        while True:
            bad = lp[np.arange(batch), idx] <= MASKED_LOGIT / 2
            if not bad.any():
                break
            idx[bad] -= 1
        actions[:, k] = idx
        total += lp[np.arange(batch), idx]
    if single:
        return actions[0], total[0]
    return actions, total


def greedy(logits, mask=None, head_spec=None):
    """Highest-probability action per head (lowest index on ties)."""
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if head_spec is None:
        head_spec = (z.shape[-1],)
    logps = head_log_probs(z, head_spec, mask)
    actions = np.stack([lp.argmax(axis=1) for lp in logps], axis=1)
    return actions[0] if single else actions


def joint_log_prob_entropy(logits, actions, head_spec, mask=None):
    """Joint log-probability and summed head entropy, batched.

    Also returns the per-head probability arrays for backprop.
    """
    z = np.atleast_2d(logits)
    a = np.atleast_2d(np.asarray(actions, dtype=np.int64))
    logps = head_log_probs(z, head_spec, mask)
    flat_mask = _flat_mask(mask, head_spec, z.shape[0])
    rows = np.arange(z.shape[0])
    logp = np.zeros(z.shape[0])
    ent = np.zeros(z.shape[0])
    probs = []
    start = 0
    for k, lp in enumerate(logps):
        if np.any(a[:, k] < 0) or np.any(a[:, k] >= head_spec[k]):
            raise InvalidActionError(f"action outside head {k} cardinality")
        if not flat_mask[rows, start + a[:, k]].all():
            raise InvalidActionError("queried a masked action")
        start += head_spec[k]
        chosen = lp[rows, a[:, k]]
        p = np.exp(lp)
        logp += chosen
        ent -= (p * lp).sum(axis=1)
        probs.append(p)
    return logp, ent, probs


def log_prob_and_entropy(net, obs, action, mask=None):
    logits, _ = net.forward(obs)
    logp, ent, _ = joint_log_prob_entropy(logits, action, net.head_spec, mask)
    if np.ndim(obs) == 1:
        return float(logp[0]), float(ent[0])
    return logp, ent


def dlogits_from_heads(probs, actions, head_spec, d_logp, d_ent, ent_heads=None):
    """Gradient of ``sum(d_logp * logp + d_ent * entropy)`` with respect to logits."""
    a = np.atleast_2d(actions)
    batch = a.shape[0]
    rows = np.arange(batch)
    out = np.zeros((batch, sum(head_spec)))
    start = 0
    for k, p in enumerate(probs):
        n = head_spec[k]
        g = -p * d_logp[:, None]
        g[rows, a[:, k]] += d_logp
        # dH/dz_j = -p_j (log p_j + H)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        h = -(p * logp).sum(axis=1, keepdims=True)
        g += d_ent[:, None] * (-p * (logp + h))
        out[:, start:start + n] = g
        start += n
    return out


# -- controllers ----------------------------------------------------------


def build_controllers(obs_width, rng=None, trunk_sizes=(64, 64), head_sizes=(64,),
                      head_spec=(13, 9, 2, 2), trunk=None):
    """Attack, engage and defend nets sharing one trunk (a new one unless given)."""
    rng = np.random.default_rng(0) if rng is None else rng
    if trunk is None:
        trunk = Trunk.build(obs_width, trunk_sizes, rng, trunk_id="low-level-trunk")
    return {role: PolicyNet.build(role, obs_width, head_spec, trunk=trunk,
                                  head_sizes=head_sizes, rng=rng)
            for role in LOW_LEVEL_ROLES}


def build_commander(obs_width, rng=None, hidden=(64, 64), tags=None):
    return PolicyNet.build(COMMANDER_ROLE, obs_width, (3,), trunk_sizes=hidden, rng=rng, tags=tags)


# -- checkpoints ------------------------------------------------------------


def checkpoint_bytes(net):
    params = [np.ascontiguousarray(p, dtype="<f8") for p in net.parameters()]
    blob = b"".join(p.tobytes() for p in params)
    header = {
        "format": "aircombat-policy",
        "role": net.role,
        "obs_width": net.obs_width,
        "head_spec": list(net.head_spec),
        "trunk_sizes": net.trunk.sizes,
        "head_sizes": [w.shape[1] for w, _ in net.head_layers],
        "trunk_id": net.trunk.trunk_id,
        "tags": net.tags,
        "shapes": [list(p.shape) for p in params],
        "n_params": int(sum(p.size for p in params)),
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(hbytes)) + hbytes + blob


def save_checkpoint(net, path):
    data = checkpoint_bytes(net)
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def read_checkpoint_header(path):
    return _parse(path)[0]


def _parse(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a policy checkpoint")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if len(data) < 16 + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: corrupt header") from None
    blob = data[16 + hlen:]
    if len(blob) != 8 * header.get("n_params", -1):
        raise CheckpointError(f"{path}: parameter blob has {len(blob)} bytes, expected {8 * header.get('n_params', 0)}")
    if hashlib.sha256(blob).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"{path}: parameter checksum mismatch")
    return header, blob


def load_checkpoint(path, expect_role=None):
    """Load a network; ``expect_role`` may be a role name or a tuple of names."""
    header, blob = _parse(path)
    role = header["role"]
    if expect_role is not None:
        allowed = (expect_role,) if isinstance(expect_role, str) else tuple(expect_role)
        if role not in allowed:
            raise CheckpointError(f"{path}: checkpoint role {role!r}, expected {allowed}")
    flat = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    arrays, i = [], 0
    for shape in header["shapes"]:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(flat[i:i + n].reshape(shape).copy())
        i += n
    n_trunk = 2 * len(header["trunk_sizes"])
    n_head = 2 * len(header["head_sizes"])
    if len(arrays) != n_trunk + n_head + 4:
        raise CheckpointError(f"{path}: shape list inconsistent with layer sizes")
    trunk = Trunk([arrays[j:j + 2] for j in range(0, n_trunk, 2)], header["trunk_id"])
    head_layers = [arrays[j:j + 2] for j in range(n_trunk, n_trunk + n_head, 2)]
    k = n_trunk + n_head
    return PolicyNet(role, trunk, head_layers, arrays[k:k + 2], arrays[k + 2:k + 4],
                     header["head_spec"], header.get("tags"))


def share_trunks(nets):
    """Re-link nets whose trunks are bit-identical copies of one another to a single object."""
    seen = {}
    for net in nets:
        key = (net.trunk.trunk_id,
               hashlib.sha256(b"".join(p.astype("<f8").tobytes() for p in net.trunk.parameters())).hexdigest())
        if key in seen:
            net.trunk = seen[key]
        else:
            seen[key] = net.trunk
    return nets
