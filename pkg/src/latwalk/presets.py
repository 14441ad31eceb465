"""Built-in chains and IFS presets used by the CLI and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .fractal import GDIFS, Edge
from .groups import Similarity, make_block_element, sl3_paper_example
from .markov import ChainSpec


def chain_to_json(chain: ChainSpec) -> dict:
    return {
        "states": list(chain.states),
        "trans": chain.trans.tolist(),
        "coding": [g.tolist() for g in chain.coding],
        "start": chain.start.tolist(),
    }


def chain_from_json(obj: dict) -> ChainSpec:
    return ChainSpec(
        states=tuple(obj["states"]),
        trans=np.asarray(obj["trans"], dtype=float),
        coding=tuple(np.asarray(g, dtype=float) for g in obj["coding"]),
        start=np.asarray(obj["start"], dtype=float),
    )


def _sl3_chain() -> ChainSpec:
    g1, g2, g3 = sl3_paper_example()
    return ChainSpec.iid(
        [1 / 3, 1 / 3, 1 / 3], [g1, g2, g3], states=("g1", "g2", "g3")
    )


def _cor14_chain() -> ChainSpec:
    # d = 1 block generators; the second state is universally accessible and
    # its translation spans R^1, so the walk equidistributes.
    g0 = make_block_element(2.0, np.eye(1), [0.0])
    g1 = make_block_element(3.0, np.eye(1), [1.0])
    trans = np.array([[0.3, 0.6], [0.7, 0.4]])  # trans[target, source]
    return ChainSpec(
        states=("c2", "c3y1"),
        trans=trans,
        coding=(g0, g1),
        start=np.array([0.5, 0.5]),
    )


def _renewal_chain() -> ChainSpec:
    # two states a, b with p(a->b) = 1, p(b->a) = p(b->b) = 1/2 and coded
    # flow times t = 1 and t = -0.2 (block shape M = N = 1)
    t_a, t_b = 1.0, -0.2
    g_a = np.array([[np.exp(t_a), -np.exp(t_a) * 0.3], [0.0, np.exp(-t_a)]])
    g_b = np.array([[np.exp(t_b), -np.exp(t_b) * -0.4], [0.0, np.exp(-t_b)]])
    trans = np.array([[0.0, 0.5], [1.0, 0.5]])
    return ChainSpec(
        states=("a", "b"),
        trans=trans,
        coding=(g_a, g_b),
        start=np.array([1.0, 0.0]),
    )


def _sym_mixture_chain() -> ChainSpec:
    return ChainSpec.iid(
        [0.5, 0.5],
        [np.diag([2.0, 0.5]), np.diag([0.5, 2.0])],
        states=("expand", "contract"),
    )


def _identity_chain() -> ChainSpec:
    return ChainSpec.iid([1.0], [np.eye(2)], states=("id",))


def _cantor_third() -> GDIFS:
    phi0 = Similarity(1, 1, 1.0 / 3.0, [[1.0]], [[1.0]], [[0.0]])
    phi1 = Similarity(1, 1, 1.0 / 3.0, [[1.0]], [[1.0]], [[2.0 / 3.0]])
    return GDIFS(
        vertices=("v",),
        edges=(Edge("0", "v", "v", phi0), Edge("1", "v", "v", phi1)),
    )


def _two_vertex_golden() -> GDIFS:
    half = 0.5
    s = lambda b: Similarity(1, 1, half, [[1.0]], [[1.0]], [[b]])
    return GDIFS(
        vertices=("u", "v"),
        edges=(
            Edge("uv", "u", "v", s(0.0)),
            Edge("vu", "v", "u", s(0.25)),
            Edge("vv", "v", "v", s(0.5)),
        ),
    )


CHAIN_PRESETS = {
    "sl3-paper-example": _sl3_chain,
    "cor14-two-state": _cor14_chain,
    "renewal-two-state": _renewal_chain,
    "sym-mixture-2d": _sym_mixture_chain,
    "identity-2d": _identity_chain,
}

GDIFS_PRESETS = {
    "cantor-one-third": _cantor_third,
    "two-vertex-golden": _two_vertex_golden,
}


def get_chain(name: str) -> ChainSpec:
    if name not in CHAIN_PRESETS:
        raise KeyError(f"unknown chain preset {name!r}")
    return CHAIN_PRESETS[name]()


def get_gdifs(name: str) -> GDIFS:
    if name not in GDIFS_PRESETS:
        raise KeyError(f"unknown IFS preset {name!r}")
    return GDIFS_PRESETS[name]()


def preset_names() -> dict:
    return {
        "chains": sorted(CHAIN_PRESETS),
        "gdifs": sorted(GDIFS_PRESETS),
    }
