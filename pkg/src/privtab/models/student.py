"""Student discriminators: the column-token transformer and an MLP variant.

The transformer treats every semantic column (continuous scalar, one-hot
group, binary scalar) as one token: a dedicated linear projection lifts the
column slice into a shared 64-dim embedding space, a learnable positional
embedding is added per column, and 3 post-norm encoder layers with 4
attention heads process the sequence. The encoder output is mean-pooled over
tokens, layer-normed, and a two-layer MLP head emits one real/fake logit per
row.

The MLP variant (two relu hidden layers of width 256 on the flat encoding)
exposes the same interface, so the training loop is identical under either.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..errors import ParameterError, ShapeError
from ..tabular.schema import TableSchema
from .initialization import kaiming_uniform, xavier_uniform

D_MODEL = 64
N_HEADS = 4
N_LAYERS = 3
FF_DIM = 4 * D_MODEL
HEAD_HIDDEN = 64
MLP_HIDDEN = 256


class _EncoderLayer:
    def __init__(self, d_model: int, n_heads: int, ff_dim: int, rng, tag: str):
        self.n_heads = n_heads
        x = xavier_uniform
        self.wq = dc.Tensor(x(d_model, d_model, rng), requires_grad=True, name=f"{tag}.wq")
        self.wk = dc.Tensor(x(d_model, d_model, rng), requires_grad=True, name=f"{tag}.wk")
        self.wv = dc.Tensor(x(d_model, d_model, rng), requires_grad=True, name=f"{tag}.wv")
        self.wo = dc.Tensor(x(d_model, d_model, rng), requires_grad=True, name=f"{tag}.wo")
        self.bq = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.bq")
        self.bk = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.bk")
        self.bv = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.bv")
        self.bo = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.bo")
        self.ff1 = dc.Tensor(kaiming_uniform(d_model, ff_dim, rng), requires_grad=True, name=f"{tag}.ff1.weight")
        self.ff1_b = dc.Tensor(np.zeros((1, ff_dim)), requires_grad=True, name=f"{tag}.ff1.bias")
        self.ff2 = dc.Tensor(x(ff_dim, d_model, rng), requires_grad=True, name=f"{tag}.ff2.weight")
        self.ff2_b = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.ff2.bias")
        self.ln1_g = dc.Tensor(np.ones((1, d_model)), requires_grad=True, name=f"{tag}.ln1.gamma")
        self.ln1_b = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.ln1.beta")
        self.ln2_g = dc.Tensor(np.ones((1, d_model)), requires_grad=True, name=f"{tag}.ln2.gamma")
        self.ln2_b = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"{tag}.ln2.beta")

    def forward(self, h_tok: dc.Tensor, n_tokens: int) -> dc.Tensor:
        """h_tok: (batch*tokens, d_model). Post-norm residual layout."""

        def proj(w, b):
            return dc.add(dc.matmul(h_tok, w), b)

        q = dc.merge_tokens(proj(self.wq, self.bq), n_tokens)
        k = dc.merge_tokens(proj(self.wk, self.bk), n_tokens)
        v = dc.merge_tokens(proj(self.wv, self.bv), n_tokens)
        attn = dc.scaled_dot_attention(q, k, v, n_tokens, self.n_heads)
        attn = dc.split_tokens(attn, n_tokens)
        attn = dc.add(dc.matmul(attn, self.wo), self.bo)
        h_tok = dc.layer_norm(dc.add(h_tok, attn), self.ln1_g, self.ln1_b)

        ff = dc.add(dc.matmul(h_tok, self.ff1), self.ff1_b)
        ff = dc.relu(ff)
        ff = dc.add(dc.matmul(ff, self.ff2), self.ff2_b)
        return dc.layer_norm(dc.add(h_tok, ff), self.ln2_g, self.ln2_b)

    def parameters(self):
        return [
            self.wq, self.wk, self.wv, self.wo,
            self.bq, self.bk, self.bv, self.bo,
            self.ff1, self.ff1_b, self.ff2, self.ff2_b,
            self.ln1_g, self.ln1_b, self.ln2_g, self.ln2_b,
        ]


class TransformerStudent:
    kind = "transformer"

    def __init__(
        self,
        schema: TableSchema,
        rng: np.random.Generator,
        d_model: int = D_MODEL,
        n_heads: int = N_HEADS,
        n_layers: int = N_LAYERS,
        ff_dim: int = FF_DIM,
    ):
        if d_model % n_heads != 0:
            raise ParameterError(f"student: d_model {d_model} not divisible by heads {n_heads}")
        self.schema = schema
        self.d_model = d_model
        self.n_heads = n_heads
        self.layout = schema.layout()
        self.n_tokens = len(self.layout)

        self.token_w = []
        self.token_b = []
        for i, (_, _, start, stop) in enumerate(self.layout):
            w = dc.Tensor(
                xavier_uniform(stop - start, d_model, rng),
                requires_grad=True,
                name=f"student.token{i}.weight",
            )
            b = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name=f"student.token{i}.bias")
            self.token_w.append(w)
            self.token_b.append(b)
        self.pos_embed = dc.Tensor(
            np.zeros((1, self.n_tokens * d_model)), requires_grad=True, name="student.pos_embed"
        )
        self.layers = [
            _EncoderLayer(d_model, n_heads, ff_dim, rng, tag=f"student.layer{i}")
            for i in range(n_layers)
        ]
        self.pool_ln_g = dc.Tensor(np.ones((1, d_model)), requires_grad=True, name="student.pool_ln.gamma")
        self.pool_ln_b = dc.Tensor(np.zeros((1, d_model)), requires_grad=True, name="student.pool_ln.beta")
        self.head1 = dc.Tensor(kaiming_uniform(d_model, HEAD_HIDDEN, rng), requires_grad=True, name="student.head1.weight")
        self.head1_b = dc.Tensor(np.zeros((1, HEAD_HIDDEN)), requires_grad=True, name="student.head1.bias")
        self.head2 = dc.Tensor(xavier_uniform(HEAD_HIDDEN, 1, rng), requires_grad=True, name="student.head2.weight")
        self.head2_b = dc.Tensor(np.zeros((1, 1)), requires_grad=True, name="student.head2.bias")

    def embed_tokens(self, x: dc.Tensor) -> dc.Tensor:
        """Per-column projections + positional embeddings: (batch, tokens*d)."""
        tokens = []
        for (name, kind, start, stop), w, b in zip(self.layout, self.token_w, self.token_b):
            piece = dc.slice_cols(x, start, stop)
            tokens.append(dc.add(dc.matmul(piece, w), b))
        return dc.add(dc.concat(tokens), self.pos_embed)

    def forward(self, x) -> dc.Tensor:
        x = x if isinstance(x, dc.Tensor) else dc.constant(np.asarray(x, dtype=np.float64))
        if x.data.shape[1] != self.schema.n_feat:
            raise ShapeError("student_forward", x.data.shape, (self.schema.n_feat,))
        h = dc.split_tokens(self.embed_tokens(x), self.n_tokens)
        for layer in self.layers:
            h = layer.forward(h, self.n_tokens)
        pooled = dc.mean_pool(dc.merge_tokens(h, self.n_tokens), self.n_tokens)
        pooled = dc.layer_norm(pooled, self.pool_ln_g, self.pool_ln_b)
        hidden = dc.relu(dc.add(dc.matmul(pooled, self.head1), self.head1_b))
        return dc.add(dc.matmul(hidden, self.head2), self.head2_b)

    def parameters(self):
        params = list(self.token_w) + list(self.token_b) + [self.pos_embed]
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend([
            self.pool_ln_g, self.pool_ln_b,
            self.head1, self.head1_b, self.head2, self.head2_b,
        ])
        return params

    def named_arrays(self):
        return {p.name: p.data for p in self.parameters()}


class MlpStudent:
    kind = "mlp"

    def __init__(self, schema: TableSchema, rng: np.random.Generator, hidden: int = MLP_HIDDEN):
        self.schema = schema
        d = schema.n_feat
        self.w1 = dc.Tensor(kaiming_uniform(d, hidden, rng), requires_grad=True, name="student.fc1.weight")
        self.b1 = dc.Tensor(np.zeros((1, hidden)), requires_grad=True, name="student.fc1.bias")
        self.w2 = dc.Tensor(kaiming_uniform(hidden, hidden, rng), requires_grad=True, name="student.fc2.weight")
        self.b2 = dc.Tensor(np.zeros((1, hidden)), requires_grad=True, name="student.fc2.bias")
        self.w3 = dc.Tensor(xavier_uniform(hidden, 1, rng), requires_grad=True, name="student.head.weight")
        self.b3 = dc.Tensor(np.zeros((1, 1)), requires_grad=True, name="student.head.bias")

    def forward(self, x) -> dc.Tensor:
        x = x if isinstance(x, dc.Tensor) else dc.constant(np.asarray(x, dtype=np.float64))
        if x.data.shape[1] != self.schema.n_feat:
            raise ShapeError("student_forward", x.data.shape, (self.schema.n_feat,))
        h = dc.relu(dc.add(dc.matmul(x, self.w1), self.b1))
        h = dc.relu(dc.add(dc.matmul(h, self.w2), self.b2))
        return dc.add(dc.matmul(h, self.w3), self.b3)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def named_arrays(self):
        return {p.name: p.data for p in self.parameters()}


def make_student(kind: str, schema: TableSchema, rng: np.random.Generator):
    if kind == "transformer":
        return TransformerStudent(schema, rng)
    if kind == "mlp":
        return MlpStudent(schema, rng)
    raise ParameterError(f"unknown student kind {kind!r} (expected transformer or mlp)")


def student_forward(student, x) -> dc.Tensor:
    """Logits (one per row) for an encoded batch; differentiable."""
    return student.forward(x)
