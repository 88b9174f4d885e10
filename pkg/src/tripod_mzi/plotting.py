"""PNG figures next to the CSV output. Needs the optional ``matplotlib`` extra."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PlottingUnavailable(ImportError):
    pass


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise PlottingUnavailable("figures need matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    # fixed metadata keeps the PNGs reproducible
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    fig.clf()
    return path


def plot_write_kernel(wk, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(wk.z_grid.nodes, wk.t_grid.nodes, wk.values, shading="auto", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label=r"$G_{ab}(t,z)$")
    ax.set_xlabel("z")
    ax.set_ylabel("t")
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_schmidt_modes(basis, path, n_show: int = 4) -> Path:
    plt = _pyplot()
    n = min(n_show, basis.n_modes)
    fig, (ax_t, ax_z) = plt.subplots(1, 2, figsize=(9, 3.5))
    for i in range(n):
        label = rf"$i={i + 1}$, $\lambda={basis.lambdas[i]:.4f}$"
        ax_t.plot(basis.t_grid.nodes, basis.phi[:, i], label=label)
        ax_z.plot(basis.z_grid.nodes, basis.g[:, i])
    ax_t.set_xlabel("t")
    ax_t.set_ylabel(r"$\varphi_i(t)$")
    ax_z.set_xlabel("z")
    ax_z.set_ylabel(r"$g_i(z)$")
    ax_t.legend(fontsize=8, frameon=False)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_scenario(report, path) -> Path:
    """Duan values per Schmidt mode for every reported pair."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    pairs = list(report.modes[0].duan) if report.modes else []
    idx = np.arange(1, len(report.modes) + 1)
    for pair in pairs:
        vals = [m.duan[pair].value for m in report.modes]
        ax.semilogy(idx, vals, "o-", label=pair)
    ax.axhline(1.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel("Schmidt mode")
    ax.set_ylabel("Duan D")
    ax.set_title(report.name)
    if pairs:
        ax.legend(fontsize=7, frameon=False)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_oracle(t, pde, kernel, path, label="full cycle") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, kernel, "k-", lw=1.5, label="kernel")
    ax.plot(t, pde, "r--", lw=1.0, label="PDE")
    ax.set_xlabel("t")
    ax.set_ylabel("amplitude")
    ax.set_title(label)
    ax.legend(frameon=False)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_sweep(rows, param: str, path, n_show: int = 4) -> Path:
    """``rows`` are ``(value, i, lambda, phi0_sq)`` tuples."""
    plt = _pyplot()
    fig, (ax_l, ax_p) = plt.subplots(1, 2, figsize=(9, 3.5))
    modes = sorted({r[1] for r in rows})[:n_show]
    for i in modes:
        sel = [r for r in rows if r[1] == i]
        x = [r[0] for r in sel]
        ax_l.plot(x, [r[2] for r in sel], "o-", label=f"i={i}")
        ax_p.plot(x, [r[3] for r in sel], "o-")
    ax_l.set_xlabel(param)
    ax_l.set_ylabel(r"$\lambda_i$")
    ax_p.set_xlabel(param)
    ax_p.set_ylabel(r"$\varphi_i^2(\omega=0)$")
    ax_l.legend(fontsize=8, frameon=False)
    out = _save(fig, path)
    plt.close(fig)
    return out
