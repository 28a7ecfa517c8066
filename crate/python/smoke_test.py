"""Quick end-to-end check of the hazard_lfd extension module."""

import json

import hazard_lfd as h


def main():
    pop = h.simulate("large-near-uni", 12, seed=3)
    assert len(pop) == 12
    onsets = pop.onsets()
    print(f"simulated {len(pop)} demos, mean onset {sum(onsets) / len(onsets):.2f} m")

    model, rejected = h.train(pop.demos(), "large-near-uni", pop.hazard)
    print(f"trained: {len(model.keyframes())} keyframes, rejected {rejected}")
    again = h.ScenarioModel.from_json(model.to_json())
    assert again.to_json() == model.to_json()

    hazard = h.Hazard.default("large-near-uni", 40.0)
    env = h.generate([model], [hazard], (0.0, 0.0, 0.0, 10.0))
    grid = env.grid()
    assert all(lo <= hi for _, lo, hi, _, _ in grid)
    assert json.loads(env.to_json())["format_version"] == 1
    assert env.to_svg().startswith("<svg")
    print(f"envelope: {len(grid)} grid points over {env.horizon:.0f} m")

    far = h.simulate("large-far-uni", 12, seed=4)
    report = h.compare(pop, far)
    print(report.splitlines()[0])

    assert abs(h.spline_eval([(0, 0), (1, 1), (2, 0)], [1.0])[0] - 1.0) < 1e-12
    path, cost = h.dtw([0.0, 1.0, 2.0], [0.0, 1.0, 1.0, 2.0])
    assert cost == 0.0 and path[0] == (0, 0)
    w, p = h.wilcoxon([1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5)
    t, pt = h.paired_t([1.0, 2.0, 3.5], [0.5, 1.0, 2.0])
    print(f"wilcoxon W={w} p={p:.4f}; t={t:.3f} p={pt:.4f}")
    print(f"keyframes of a step: {h.keyframe_indices([(float(i), 0.0 if i < 5 else 1.0) for i in range(10)])}")
    print("ok")


if __name__ == "__main__":
    main()
