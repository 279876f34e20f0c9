"""The four Q-network architectures and their explicit forward/backward.

All variants end in the same two-layer head; the 128-wide input of its final
linear layer is the representation tap used by the defense detectors.

    dqn    flat obs -> 64 -> 128 -> head
    drqn   [obs,a,r] features -> tanh(Fc+Wh h) -> GRU -> 128 -> head
    eadqn  per-vehicle 7->64->128 embeddings -> ego attention -> head
    dagqn  drqn trunk feeding per-vehicle embeddings (64+128 -> 128)
           -> ego attention -> head

Batched over a leading B dimension; recurrent state h is (B, 128).
"""

from __future__ import annotations

import math

import numpy as np

from ..numkit import (
    Params,
    attention_backward,
    attention_forward_ctx,
    attention_init,
    gru_backward,
    gru_forward_ctx,
    gru_init,
    linear_backward,
    linear_forward_ctx,
    linear_init,
)
from ..numkit.layers import relu_margin

ARCHITECTURES = ("dqn", "drqn", "eadqn", "dagqn")
HIDDEN = 128
N_ACTIONS = 5
ATT_HEADS = 2
ATT_DHEAD = 64


class QNetwork:
    def __init__(self, arch: str, rng: np.random.Generator,
                 obs_rows: int = 7, obs_cols: int = 7, n_actions: int = N_ACTIONS):
        if arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {arch!r}")
        self.arch = arch
        self.obs_rows = obs_rows
        self.obs_cols = obs_cols
        self.n_actions = n_actions
        self.recurrent = arch in ("drqn", "dagqn")
        self.attentive = arch in ("eadqn", "dagqn")
        flat = obs_rows * obs_cols
        L: dict[str, Params] = {}
        if self.recurrent:
            L["f_s"] = linear_init(rng, flat, 64, relu=True)
            L["f_a"] = linear_init(rng, 1, 8, relu=True)
            L["f_r"] = linear_init(rng, 1, 8, relu=True)
            L["f_c"] = linear_init(rng, 80, HIDDEN, relu=False)
            L["f_h"] = linear_init(rng, HIDDEN, HIDDEN, relu=False, bias=False)
            L["gru"] = gru_init(rng, HIDDEN, HIDDEN)
            L["f_g"] = linear_init(rng, HIDDEN, HIDDEN, relu=True)
        elif arch == "dqn":
            L["f_s"] = linear_init(rng, flat, 64, relu=True)
            L["f_c"] = linear_init(rng, 64, HIDDEN, relu=True)
        if self.attentive:
            L["f_ee"] = linear_init(rng, obs_cols, 64, relu=True)
            L["f_oe"] = linear_init(rng, obs_cols, 64, relu=True)
            embed_in = 64 + (HIDDEN if self.recurrent else 0)
            L["f_ed"] = linear_init(rng, embed_in, HIDDEN, relu=True)
            L["f_od"] = linear_init(rng, embed_in, HIDDEN, relu=True)
            L["att"] = attention_init(rng, HIDDEN, ATT_DHEAD, ATT_HEADS)
        L["f_o1"] = linear_init(rng, HIDDEN, HIDDEN, relu=True)
        L["f_o2"] = linear_init(rng, HIDDEN, n_actions, relu=False)
        self.layers = L

    # ------------------------------------------------------------------

    def layer_names(self) -> list[str]:
        return sorted(self.layers)

    def params_list(self) -> list[Params]:
        return [self.layers[k] for k in self.layer_names()]

    def zero_grads(self) -> None:
        for p in self.layers.values():
            p.zero_grads()

    def copy_from(self, other: "QNetwork") -> None:
        for name, p in self.layers.items():
            p.copy_from(other.layers[name])

    def clone(self) -> "QNetwork":
        twin = QNetwork.__new__(QNetwork)
        twin.__dict__.update({k: v for k, v in self.__dict__.items() if k != "layers"})
        twin.layers = {k: p.clone() for k, p in self.layers.items()}
        return twin

    def tensors(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{wn}": w for ln, p in self.layers.items()
                for wn, w in p.weights.items()}

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        mine = self.tensors()
        if set(mine) != set(tensors):
            missing = set(mine) ^ set(tensors)
            raise ValueError(f"tensor set mismatch: {sorted(missing)}")
        for ln, p in self.layers.items():
            for wn in p.weights:
                arr = np.asarray(tensors[f"{ln}.{wn}"], dtype=np.float64)
                if arr.shape != p.weights[wn].shape:
                    raise ValueError(f"shape mismatch for {ln}.{wn}")
                p.weights[wn][...] = arr

    def zero_hidden(self, batch: int = 1) -> np.ndarray | None:
        return np.zeros((batch, HIDDEN)) if self.recurrent else None

    # ------------------------------------------------------------------
    # forward
    # ------------------------------------------------------------------

    def forward(self, obs, a_prev, r_prev, h, presence=None):
        """obs (B,R,C); a_prev (B,) action indices; r_prev (B,); h (B,128) or
        None; presence (B,R) bool. Returns (q (B,A), h_new, rep (B,128), ctx).
        """
        obs = np.asarray(obs, dtype=np.float64)
        B = obs.shape[0]
        L = self.layers
        ctx: dict = {}
        if self.recurrent:
            a_feat = (np.asarray(a_prev, dtype=np.float64) / (self.n_actions - 1)).reshape(B, 1)
            r_feat = np.asarray(r_prev, dtype=np.float64).reshape(B, 1)
            fs, ctx["f_s"] = linear_forward_ctx(L["f_s"], obs.reshape(B, -1))
            fa, ctx["f_a"] = linear_forward_ctx(L["f_a"], a_feat)
            fr, ctx["f_r"] = linear_forward_ctx(L["f_r"], r_feat)
            fc_in = np.concatenate([fs, fa, fr], axis=1)
            c, ctx["f_c"] = linear_forward_ctx(L["f_c"], fc_in)
            hp, ctx["f_h"] = linear_forward_ctx(L["f_h"], h)
            g_in = np.tanh(c + hp)
            ctx["g_in"] = g_in
            (gout, h_new), ctx["gru"] = gru_forward_ctx(L["gru"], g_in, h)
            fg, ctx["f_g"] = linear_forward_ctx(L["f_g"], gout)
            trunk = fg
        elif self.arch == "dqn":
            fs, ctx["f_s"] = linear_forward_ctx(L["f_s"], obs.reshape(B, -1))
            trunk, ctx["f_c"] = linear_forward_ctx(L["f_c"], fs)
            h_new = None
        else:  # eadqn: no shared trunk
            trunk = None
            h_new = None

        if self.attentive:
            ego_e, ctx["f_ee"] = linear_forward_ctx(L["f_ee"], obs[:, 0, :])
            oth_e, ctx["f_oe"] = linear_forward_ctx(L["f_oe"], obs[:, 1:, :])
            if trunk is not None:
                ego_cat = np.concatenate([ego_e, trunk], axis=1)
                oth_cat = np.concatenate(
                    [oth_e, np.broadcast_to(trunk[:, None, :],
                                            (B, self.obs_rows - 1, HIDDEN))], axis=2)
            else:
                ego_cat, oth_cat = ego_e, oth_e
            ed, ctx["f_ed"] = linear_forward_ctx(L["f_ed"], ego_cat)
            od, ctx["f_od"] = linear_forward_ctx(L["f_od"], oth_cat)
            feats = np.concatenate([ed[:, None, :], od], axis=1)
            mask = None
            if presence is not None:
                mask = np.asarray(presence, dtype=bool)
            att_out, ctx["att"] = attention_forward_ctx(L["att"], feats, mask)
            head_in = att_out
        else:
            head_in = trunk

        rep, ctx["f_o1"] = linear_forward_ctx(L["f_o1"], head_in)
        q, ctx["f_o2"] = linear_forward_ctx(L["f_o2"], rep)
        return q, h_new, rep, ctx

    # ------------------------------------------------------------------
    # backward
    # ------------------------------------------------------------------

    def backward(self, ctx, dq, dh_next=None):
        """Accumulates parameter gradients; returns dh_prev for recurrent
        architectures (gradient w.r.t. the incoming hidden state)."""
        L = self.layers
        drep = linear_backward(L["f_o2"], ctx["f_o2"], dq)
        dhead = linear_backward(L["f_o1"], ctx["f_o1"], drep)

        dtrunk = None
        if self.attentive:
            dfeats = attention_backward(L["att"], ctx["att"], dhead)
            d_ed = dfeats[:, 0, :]
            d_od = dfeats[:, 1:, :]
            dego_cat = linear_backward(L["f_ed"], ctx["f_ed"], d_ed)
            doth_cat = linear_backward(L["f_od"], ctx["f_od"], d_od)
            if self.recurrent:
                dego_e, dtr1 = dego_cat[:, :64], dego_cat[:, 64:]
                doth_e, dtr2 = doth_cat[:, :, :64], doth_cat[:, :, 64:]
                dtrunk = dtr1 + dtr2.sum(axis=1)
            else:
                dego_e, doth_e = dego_cat, doth_cat
            linear_backward(L["f_ee"], ctx["f_ee"], dego_e)
            linear_backward(L["f_oe"], ctx["f_oe"], doth_e)
        else:
            dtrunk = dhead

        if self.recurrent:
            dgout = linear_backward(L["f_g"], ctx["f_g"], dtrunk)
            dh_total = dgout if dh_next is None else dgout + dh_next
            dg_in, dh_prev = gru_backward(L["gru"], ctx["gru"], dh_total)
            dsum = dg_in * (1.0 - ctx["g_in"] ** 2)
            dh_prev = dh_prev + linear_backward(L["f_h"], ctx["f_h"], dsum)
            dfc_in = linear_backward(L["f_c"], ctx["f_c"], dsum)
            linear_backward(L["f_s"], ctx["f_s"], dfc_in[:, :64])
            linear_backward(L["f_a"], ctx["f_a"], dfc_in[:, 64:72])
            linear_backward(L["f_r"], ctx["f_r"], dfc_in[:, 72:80])
            return dh_prev
        if self.arch == "dqn":
            dfs = linear_backward(L["f_c"], ctx["f_c"], dtrunk)
            linear_backward(L["f_s"], ctx["f_s"], dfs)
        return None

    def relu_margin(self, ctx) -> float:
        """Smallest |pre-activation| across relu layers in this ctx; used to
        dodge kinks when finite-difference checking."""
        worst = math.inf
        for name, p in self.layers.items():
            if p.kind == "linear" and p.meta.get("relu") and name in ctx:
                worst = min(worst, relu_margin(ctx[name]))
        return worst
