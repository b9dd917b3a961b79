"""Toy-scale training with the spanning-tree distance regularizer.

A small binary network is trained on a synthetic oriented-bar task.  Each
binary layer gets a fixed random set of +-1 center vectors; the squared
distance from every channel's binarized weights to its nearest center is
added to the loss, scaled by lambda and a gamma that follows the learning
rate.  Pulling channels toward shared centers shrinks their pairwise
Hamming distances and with them the spanning-tree cost of the layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from mstbnn import graph as graph_mod
from mstbnn.core import LayerShape, layer_from_bits


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


# --- sign functions and their surrogates ---------------------------------

class _SignWeight(torch.autograd.Function):
    """sign with clip straight-through gradient (passes where |w| <= 1)."""

    @staticmethod
    def forward(ctx, w):
        ctx.save_for_backward(w)
        return torch.where(w >= 0, 1.0, -1.0).to(w.dtype)

    @staticmethod
    def backward(ctx, grad):
        (w,) = ctx.saved_tensors
        return grad * (w.abs() <= 1).to(grad.dtype)


class _SignAct(torch.autograd.Function):
    """sign with the piecewise-polynomial surrogate gradient."""

    @staticmethod
    def forward(ctx, a):
        ctx.save_for_backward(a)
        return torch.where(a >= 0, 1.0, -1.0).to(a.dtype)

    @staticmethod
    def backward(ctx, grad):
        (a,) = ctx.saved_tensors
        slope = torch.zeros_like(a)
        neg = (a >= -1) & (a < 0)
        pos = (a >= 0) & (a < 1)
        slope[neg] = 2 + 2 * a[neg]
        slope[pos] = 2 - 2 * a[pos]
        return grad * slope


def soft_sign_weight(w):
    """Hard-tanh: the differentiable stand-in for weight sign in soft mode."""
    return torch.clamp(w, -1.0, 1.0)


def soft_sign_act(a):
    """Piecewise polynomial whose derivative is the surrogate gradient."""
    out = torch.where(a >= 0, 2 * a - a * a, 2 * a + a * a)
    return torch.clamp(out, -1.0, 1.0)


class BinaryConv2d(nn.Module):
    """3x3 stride-1 conv with binarized weights and a learnable scale."""

    def __init__(self, c_in, c_out, m=3, soft=False):
        super().__init__()
        self.c_in, self.c_out, self.m = c_in, c_out, m
        self.soft = soft
        self.weight = nn.Parameter(torch.empty(c_out, c_in, m, m))
        nn.init.normal_(self.weight, std=0.3)
        self.alpha = nn.Parameter(torch.ones(()))

    def binary_weight(self):
        if self.soft:
            return soft_sign_weight(self.weight)
        return _SignWeight.apply(self.weight)

    def forward(self, x):
        wb = self.binary_weight()
        out = F.conv2d(x, wb, padding=self.m // 2)
        # fan-in normalization keeps pre-sign magnitudes O(1)
        return out * (self.alpha / math.sqrt(self.c_in * self.m * self.m))


def binary_act(x, soft=False):
    return soft_sign_act(x) if soft else _SignAct.apply(x)


class ToyNet(nn.Module):
    """Real conv in, two binary convs, real classifier head."""

    def __init__(self, soft=False):
        super().__init__()
        self.soft = soft
        self.conv_in = nn.Conv2d(1, 8, 3, padding=1)
        self.bconv1 = BinaryConv2d(8, 16, soft=soft)
        self.bconv2 = BinaryConv2d(16, 16, soft=soft)
        self.fc = nn.Linear(16, 4)

    def binary_convs(self):
        return [self.bconv1, self.bconv2]

    def forward(self, x):
        x = self.conv_in(x)
        x = binary_act(x, self.soft)
        x = self.bconv1(x)
        x = binary_act(x, self.soft)
        x = self.bconv2(x)
        x = x.mean(dim=(2, 3))
        return self.fc(x)


class TinySoftNet(nn.Module):
    """Two-layer all-soft net (< 200 params) for finite-difference checks."""

    def __init__(self):
        super().__init__()
        self.bconv = BinaryConv2d(1, 2, soft=True)
        self.fc = nn.Linear(2, 2)

    def forward(self, x):
        x = self.bconv(x)
        x = soft_sign_act(x)
        x = x.mean(dim=(2, 3))
        return self.fc(x)


# --- centers and the distance loss ---------------------------------------

def sample_centers(nbits: int, n_centers: int, seed: int) -> np.ndarray:
    """Uniform random +-1 center vectors, (n_centers, nbits) int8."""
    if n_centers < 1:
        raise ValueError("n_centers must be >= 1")
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 2, size=(n_centers, nbits), dtype=np.int8) * 2 - 1)


def assign_centers(binary_weights: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest center per channel by Hamming distance, smallest index on ties."""
    if centers.shape[0] < 1:
        raise ValueError("centers must be nonempty")
    wb = np.asarray(binary_weights)
    ham = (wb[:, None, :] != centers[None, :, :]).sum(axis=2)
    return ham.argmin(axis=1).astype(np.int64)


def mst_loss(binary_weights, centers, assignment):
    """Unscaled sum of squared center distances; equals 4 * sum of Hammings.

    Accepts torch tensors (gradient flows through binary_weights) or
    numpy arrays.
    """
    if isinstance(binary_weights, torch.Tensor):
        c = torch.as_tensor(centers, dtype=binary_weights.dtype,
                            device=binary_weights.device)
        a = torch.as_tensor(assignment, device=binary_weights.device)
        return ((c[a] - binary_weights) ** 2).sum()
    c = np.asarray(centers, dtype=np.float64)
    wb = np.asarray(binary_weights, dtype=np.float64)
    return float(((c[np.asarray(assignment)] - wb) ** 2).sum())


def cosine_lr(epoch: int, total_epochs: int, lr0: float) -> float:
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def gamma_schedule(epoch: int, total_epochs: int, lr_at_epoch: float,
                   lr0: float, gamma0: float) -> float:
    """gamma follows the learning rate: gamma0 * lr / lr0."""
    if not (0 <= epoch < total_epochs):
        raise ValueError("epoch out of range")
    return gamma0 * lr_at_epoch / lr0


# --- data -----------------------------------------------------------------

def oriented_bar_dataset(n: int, seed: int, noise: float = 0.6):
    """4-class 8x8 oriented bars (horizontal/vertical/diagonal/anti) + noise."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, size=n)
    imgs = np.full((n, 8, 8), -1.0)
    yy, xx = np.mgrid[0:8, 0:8]
    offsets = rng.integers(-2, 3, size=n)
    for i in range(n):
        k, off = int(labels[i]), int(offsets[i])
        if k == 0:
            mask = yy == np.clip(3 + off, 0, 7)
        elif k == 1:
            mask = xx == np.clip(3 + off, 0, 7)
        elif k == 2:
            mask = (xx - yy) == off
        else:
            mask = (xx + yy - 7) == off
        imgs[i][mask] = 1.0
    imgs += rng.normal(0.0, noise, size=imgs.shape)
    x = torch.tensor(imgs, dtype=torch.float32).unsqueeze(1)
    y = torch.tensor(labels, dtype=torch.long)
    return x, y


# --- trainer --------------------------------------------------------------

@dataclass
class TrainConfig:
    lam: float = 1e-4
    gamma0: float = 1.0
    epochs: int = 20
    lr0: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    n_centers: int = 1
    batch_size: int = 128
    n_train: int = 2048
    n_test: int = 512

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    ce_loss: float
    mst_loss: float
    gamma: float
    train_acc: float
    test_acc: float
    sum_mst_distance: int
    max_depth: int
    params_bits: int

    CSV_HEADER = (
        "epoch,loss,ce_loss,mst_loss,gamma,train_acc,test_acc,"
        "sum_mst_distance,max_depth,params_bits"
    )

    def csv_row(self) -> str:
        return (
            f"{self.epoch},{self.loss:.6f},{self.ce_loss:.6f},{self.mst_loss:.6f},"
            f"{self.gamma:.6f},{self.train_acc:.4f},{self.test_acc:.4f},"
            f"{self.sum_mst_distance},{self.max_depth},{self.params_bits}"
        )


@dataclass
class TrainResult:
    history: list
    model: ToyNet
    config: TrainConfig
    centers: list = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics:
        return self.history[-1]

    def binary_layers(self, h_in: int = 8, w_in: int = 8):
        """Export the binary convs as bit-packed layers for analysis/files."""
        layers = []
        for conv in self.model.binary_convs():
            shape = LayerShape(conv.c_out, conv.c_in, conv.m, h_in, w_in,
                               pad=conv.m // 2)
            wb = conv.binary_weight().detach().reshape(conv.c_out, -1).numpy()
            layers.append(layer_from_bits(wb >= 0, shape,
                                          alpha=float(conv.alpha.detach())))
        return layers


def _flat_binary(conv: BinaryConv2d) -> torch.Tensor:
    return conv.binary_weight().reshape(conv.c_out, -1)


def _layer_tree_stats(result_layers):
    total = 0
    max_depth = 0
    params = 0
    for layer in result_layers:
        g = graph_mod.build_distance_graph(layer)
        tree = graph_mod.reroot_min_depth(graph_mod.prim_mst(g))
        total += tree.total_distance
        max_depth = max(max_depth, graph_mod.tree_depth(tree))
        params += tree.total_distance + layer.shape.full
    return total, max_depth, params


@torch.no_grad()
def _accuracy(model, x, y, batch: int = 512) -> float:
    hits = 0
    for lo in range(0, x.shape[0], batch):
        pred = model(x[lo:lo + batch]).argmax(dim=1)
        hits += int((pred == y[lo:lo + batch]).sum())
    return hits / x.shape[0]


def train_toy(config: TrainConfig) -> TrainResult:
    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    x_train, y_train = oriented_bar_dataset(config.n_train, config.seed)
    x_test, y_test = oriented_bar_dataset(config.n_test, config.seed + 10_000)

    model = ToyNet()
    centers = [
        sample_centers(conv.c_in * conv.m * conv.m, config.n_centers,
                       config.seed + 100 + i)
        for i, conv in enumerate(model.binary_convs())
    ]
    opt = torch.optim.SGD(model.parameters(), lr=config.lr0,
                          momentum=config.momentum)

    history = []
    n = x_train.shape[0]
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr0)
        gamma = gamma_schedule(epoch, config.epochs, lr, config.lr0, config.gamma0)
        for group in opt.param_groups:
            group["lr"] = lr

        perm = torch.randperm(n, generator=torch.Generator().manual_seed(
            config.seed * 1_000_003 + epoch))
        ce_sum, mst_sum, loss_sum, batches = 0.0, 0.0, 0.0, 0
        model.train()
        for lo in range(0, n, config.batch_size):
            idx = perm[lo:lo + config.batch_size]
            logits = model(x_train[idx])
            ce = F.cross_entropy(logits, y_train[idx])
            l_mst = logits.new_zeros(())
            for conv, cs in zip(model.binary_convs(), centers):
                wb = _flat_binary(conv)
                a = assign_centers(wb.detach().numpy(), cs)
                l_mst = l_mst + mst_loss(wb, cs, a)
            loss = ce + config.lam * gamma * l_mst
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch)
            opt.zero_grad()
            loss.backward()
            opt.step()
            ce_sum += float(ce.detach())
            mst_sum += float(l_mst.detach())
            loss_sum += float(loss.detach())
            batches += 1

        model.eval()
        sum_mst, max_depth, params = _layer_tree_stats(
            TrainResult([], model, config).binary_layers())
        history.append(EpochMetrics(
            epoch=epoch,
            loss=loss_sum / batches,
            ce_loss=ce_sum / batches,
            mst_loss=mst_sum / batches,
            gamma=gamma,
            train_acc=_accuracy(model, x_train, y_train),
            test_acc=_accuracy(model, x_test, y_test),
            sum_mst_distance=sum_mst,
            max_depth=max_depth,
            params_bits=params,
        ))
    return TrainResult(history, model, config, centers)


def write_metrics(history, sink) -> None:
    from mstbnn.formats import _open

    with _open(sink, "w") as fh:
        fh.write(EpochMetrics.CSV_HEADER + "\n")
        for m in history:
            fh.write(m.csv_row() + "\n")
