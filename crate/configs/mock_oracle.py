#!/usr/bin/env python3
"""Demo match oracle speaking the pairtune NDJSON protocol.

Simulates two-game matches on a quadratic Elo landscape with its optimum
at the origin, so `pairtune tune` visibly pulls the parameters toward 0.
Replace this with a wrapper around your real match runner.
"""
import json
import random
import sys

CURVATURE = 0.01  # Elo lost per squared parameter unit
DRAW_RATE = 0.82
rng = random.Random(0)


def elo_loss(theta):
    return sum(CURVATURE * v * v for v in theta.values())


def game(elo_diff):
    """One game from the first engine's perspective: +1 / 0 / -1."""
    wp = 1.0 / (1.0 + 10.0 ** (-elo_diff / 400.0))
    u = rng.random()
    if u < wp - DRAW_RATE / 2.0:
        return 1
    if u < wp + DRAW_RATE / 2.0:
        return 0
    return -1


for line in sys.stdin:
    request = json.loads(line)
    x = elo_loss(request["theta_minus"]) - elo_loss(request["theta_plus"])
    result = game(x) + game(x)
    print(json.dumps({"id": request["id"], "result": result}), flush=True)
