"""Writes the bundled network specs: the three-station cases and the ten-station network."""
import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent

RHO = {1: (.675, .9, .45), 2: (.9, .675, .9), 3: (.9, .675, .45), 4: (.9, .675, .675)}
SCV = {"A": (0, 0, 0), "B": (2.25, 0, .25), "C": (.25, .25, 2.25), "D": (0, 2.25, 2.25), "E": (8, 8, .25)}
LAMBDA = (.675, .9, .45)


def three_station(letter, number):
    routing = [[0, 1, 0], [.5, 0, .5], [0, .5, 0]]
    stations = []
    for i in range(3):
        s = {"name": str(i + 1), "service": {"rate": LAMBDA[i] / RHO[number][i], "scv": SCV[letter][i]}}
        if i == 0:
            s["arrival"] = {"dist": "poisson", "rate": .225}
        stations.append(s)
    return {"stations": stations, "routing": routing}


def ten_station():
    # Two of the published means are rounded; use the values that give rho = .9 and .4 exactly.
    means = [.45, .30, .90, .30, 27 / 70, .20, 2 / 15, .20, .15, .20]
    scv = [.5, 2, 2, .25, .25, 2, 1, 2, .5, .5]
    edges = {1: [2], 2: [3, 4], 3: [1, 5], 5: [4], 4: [6, 8], 6: [7], 7: [8, 9], 8: [6, 9], 9: [5, 10], 10: [9]}
    p = np.zeros((10, 10))
    for i, dests in edges.items():
        # Station 10 sends half its output back to 9; the other half leaves.
        share = .5 if len(dests) == 2 or i == 10 else 1.0
        for j in dests:
            p[i - 1, j - 1] = share
    ext = np.zeros(10)
    ext[0] = 1.0
    lam = np.linalg.solve(np.eye(10) - p.T, ext)
    rho = lam * np.array(means)
    stations = []
    for i in range(10):
        s = {"name": str(i + 1), "service": {"rate": 1 / means[i], "scv": scv[i]}}
        if i == 0:
            s["arrival"] = {"dist": "poisson", "rate": 1.0}
        stations.append(s)
    return {"stations": stations, "routing": p.tolist()}, rho


if __name__ == "__main__":
    for letter in SCV:
        for number in RHO:
            path = HERE / f"three_station_{letter}{number}.json"
            path.write_text(json.dumps(three_station(letter, number), indent=2) + "\n")
    spec, rho = ten_station()
    (HERE / "ten_station.json").write_text(json.dumps(spec, indent=2) + "\n")
    print("ten-station rho:", np.round(rho, 4))
