"""A minimal reverse-mode tape over numpy arrays.

Arrays are identified by ``id``; the tape keeps a reference to every input
and output it records, so those ids stay unique for its lifetime.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class Node:
    name: str
    inputs: tuple
    output: np.ndarray
    vjp: Callable


class TapeError(RuntimeError):
    pass


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []
        self.source = None
        self.result = None
        self.visited: list[str] = []

    def watch(self, x):
        self.source = x
        return x

    def record(self, name, inputs, output, vjp):
        """``vjp(g)`` maps the output cotangent to one cotangent (or None) per input."""
        self.nodes.append(Node(name, tuple(inputs), output, vjp))
        return output

    def backward(self, dy, output=None, wrt=None):
        output = self.result if output is None else output
        wrt = self.source if wrt is None else wrt
        if output is None or wrt is None:
            raise TapeError("tape has no recorded result or watched source")
        dy = np.asarray(dy)
        if dy.shape != output.shape:
            raise TapeError(f"cotangent shape {dy.shape} does not match output {output.shape}")
        grads = {id(output): dy}
        self.visited = []
        for node in reversed(self.nodes):
            self.visited.append(node.name)
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None:
                    continue
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi
        return grads.get(id(wrt), np.zeros_like(wrt))
