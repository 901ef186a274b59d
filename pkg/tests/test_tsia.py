import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from motion import dq, tsia
from motion.exceptions import ConfigError, ModelError, NonConvergenceError
from motion.tsia import Execution, PlannerParams, PosePath


def line(n, start=(0.0, 0.0, 0.0), step=(0.1, 0.0, 0.0)):
    return PosePath(
        [dq.from_translation(np.asarray(start) + k * np.asarray(step)) for k in range(n)]
    )


def screw_demo(n=10):
    first = dq.from_rotation_translation(dq.quat_from_axis_angle([1, 1, 0], 0.4), [0.3, 0.1, 0.2])
    step = dq.from_screw(np.array([0.0, 0.6, 0.8]), np.array([0.1, 0.0, 0.0]), 0.1, 0.02)
    poses = [first]
    for _ in range(n - 1):
        poses.append(poses[-1] * step)
    return PosePath(poses)


def max_deviation(a, b):
    return max(tsia.goal_error(x, y) for x, y in zip(a, b))


def test_pose_path_validation():
    with pytest.raises(ModelError):
        PosePath([dq.IDENTITY])
    with pytest.raises(ModelError):
        PosePath([dq.IDENTITY, dq.DualQuaternion(np.ones(8))])
    assert len(PosePath([dq.IDENTITY], tsia.FINAL, min_length=1)) == 1


def test_collapsed_drops_dwell_poses():
    a, b = dq.IDENTITY, dq.from_translation([1.0, 0.0, 0.0])
    path = PosePath([a, a, b, b, b, a])
    assert len(path.collapsed()) == 3
    with pytest.raises(ModelError):
        PosePath([a, a, a]).collapsed()
    assert len(PosePath([a, a, a]).collapsed(min_length=1)) == 1


def test_relative_transforms():
    x = dq.from_translation([0.2, 0.0, 0.0])
    assert all(
        np.allclose(d.vec(), dq.IDENTITY.vec()) for d in tsia.relative_transforms(PosePath([x] * 4))
    )

    deltas = tsia.relative_transforms(PosePath([dq.IDENTITY, dq.from_translation([1.0, 0.0, 0.0])]))
    assert len(deltas) == 1
    assert_allclose(deltas[0].vec(), dq.from_translation([1.0, 0.0, 0.0]).vec())

    with pytest.raises(ModelError):
        tsia.relative_transforms([dq.IDENTITY])


def test_last_relative_transform_is_the_last_step(random_pose):
    dp = PosePath([random_pose() for _ in range(6)])
    deltas = tsia.relative_transforms(dp)
    assert len(deltas) == 5
    assert_allclose(deltas[-1].vec(), (dp[-2].conj() * dp[-1]).vec(), atol=1e-12)


def test_imitated_path_reproduces_the_demonstration(random_pose):
    dp = PosePath([random_pose() for _ in range(20)])
    ip = tsia.imitated_path(tsia.relative_transforms(dp), dp[-1])
    assert ip.kind == tsia.IMITATED
    assert len(ip) == len(dp)
    assert max_deviation(ip, dp) < 1e-9


def test_imitated_path_is_left_invariant(random_pose):
    dp = PosePath([random_pose() for _ in range(10)])
    g = random_pose()
    ip = tsia.imitated_path(tsia.relative_transforms(dp), g * dp[-1])
    assert max_deviation(ip, [g * d for d in dp]) < 1e-9
    assert tsia.goal_error(ip[-1], g * dp[-1]) == 0.0

    for i, j in ((0, 4), (3, 9), (2, 3)):
        assert tsia.goal_error(ip[i].conj() * ip[j], dp[i].conj() * dp[j]) < 1e-9


def test_imitated_path_keeps_a_fixed_rotation_axis(pouring, random_pose):
    demo = pouring.demo
    ip = tsia.imitated_path(tsia.relative_transforms(demo), random_pose())
    axes = []
    for a, b in zip(ip[20:-1], ip[21:]):
        s = dq.screw(a.conj() * b)
        assert abs(s.translation) < 1e-9
        axes.append(s.axis)
    assert_allclose(axes, [axes[0]] * len(axes), atol=1e-9)


def test_target_pose(random_pose):
    x, y = random_pose(), random_pose()
    assert_allclose(tsia.target_pose(x, y, 0.0).vec(), x.vec(), atol=1e-12)
    assert dq.same_pose(tsia.target_pose(x, y, 1.0), y, tol=1e-9)
    assert np.array_equal(tsia.target_pose(x, y, 0.3).vec(), dq.sclerp(x, y, 0.3).vec())

    x = tsia.target_pose(dq.IDENTITY, dq.from_translation([1.0, 0.0, 0.0]), 0.01)
    assert_allclose(dq.translation(x), [0.01, 0, 0], atol=1e-15)


def test_select_guiding_pose():
    ip = line(10)
    params = PlannerParams(guiding_fraction=0.2)

    pose, index = tsia.select_guiding_pose(ip, None, params)
    assert index == 2
    assert pose is ip[2]

    assert tsia.select_guiding_pose(ip, 2, params)[1] == 3
    assert tsia.select_guiding_pose(ip, 8, params)[1] == 9
    assert tsia.select_guiding_pose(ip, 9, params) == (ip[9], 9)

    assert tsia.select_guiding_pose(ip, None, PlannerParams(guiding_fraction=1.0))[1] == 9
    assert tsia.select_guiding_pose(ip, None, PlannerParams(guiding_fraction=0.0))[1] == 1


def test_goal_error():
    assert tsia.goal_error(dq.IDENTITY, dq.IDENTITY) == 0.0
    assert tsia.goal_error(dq.IDENTITY, -dq.IDENTITY) == 0.0
    assert tsia.goal_error(dq.IDENTITY, dq.from_translation([1.0, 0.0, 0.0])) == pytest.approx(0.5)


def test_planner_params():
    with pytest.raises(ConfigError):
        PlannerParams(tau_step=0.0)
    with pytest.raises(ConfigError):
        PlannerParams(tau_step=1.5)
    with pytest.raises(ConfigError):
        PlannerParams(guiding_fraction=1.2)
    with pytest.raises(ConfigError):
        PlannerParams(goal_tolerance=0.0)

    assert PlannerParams(tau_step=0.01).iteration_budget(10) == math.ceil(100 / 0.01)
    assert PlannerParams(max_iterations=7).iteration_budget(10) == 7


def test_plan_from_the_imitated_path_follows_it():
    dp = screw_demo()
    goal = dq.from_rotation_translation(dq.quat_from_axis_angle([0, 0, 1], 1.0), [0.5, -0.4, 0.1])
    ip = tsia.imitated_path(tsia.relative_transforms(dp), goal)

    fp = tsia.plan(dp, ip[0], goal)
    assert fp.kind == tsia.FINAL
    assert tsia.goal_error(fp[-1], goal) <= 1e-3

    # the imitated path is one screw motion: every final pose must lie on it
    span = ip[0].conj() * ip[-1]
    total = dq.screw(span).angle
    for pose in fp:
        angle = dq.screw(ip[0].conj() * pose).angle
        on_path = ip[0] * dq.pow(span, angle / total)
        assert tsia.goal_error(pose, on_path) < 1e-6


def test_self_retarget_reaches_the_demonstrated_goal(pouring):
    demo = pouring.demo
    fp = tsia.plan(demo, demo[0], demo[-1])
    assert tsia.goal_error(fp[-1], demo[-1]) <= 1e-3
    assert fp[0] is demo[0]


def test_plan_is_left_invariant(pouring, random_pose):
    demo = pouring.demo
    g = random_pose()
    goal = dq.from_translation([0.0, 0.2, 0.1]) * demo[-1]
    start = dq.from_translation([0.05, -0.05, 0.0]) * demo[0]

    fp = tsia.plan(demo, start, goal)
    moved = tsia.plan(PosePath([g * d for d in demo]), g * start, g * goal)

    # goal_error is a vec norm, so the two runs may stop a few iterations apart
    common = min(len(fp), len(moved))
    assert common > 100
    assert max_deviation(moved[:common], [g * x for x in fp[:common]]) < 1e-8


def test_plan_preserves_a_rotation_constraint(pouring):
    demo, point, tilt = pouring
    g = dq.from_rotation_translation(dq.quat_from_axis_angle([0, 0, 1], 0.7), [0.1, -0.2, 0.05])
    goal = g * demo[-1]
    ip = tsia.imitated_path(tsia.relative_transforms(demo), goal)

    # a start on the rotation part of the imitated path, guided from further along it
    start = dq.sclerp(ip[25], ip[26], 0.5)
    fp = tsia.plan(demo, start, goal, PlannerParams(guiding_fraction=0.7))

    axis = dq.transform_point(g, tilt) - dq.translation(g)
    moment = np.cross(dq.transform_point(g, point), axis)

    checked = 0
    for a, b in zip(fp[:-1], fp[1:]):
        s = dq.screw(b * a.conj())
        if s.angle < 1e-5:
            continue
        sign = 1.0 if np.dot(s.axis, axis) > 0.0 else -1.0
        assert np.linalg.norm(sign * s.axis - axis) < 1e-6
        assert np.linalg.norm(sign * s.moment - moment) < 1e-6
        assert abs(s.translation) < 1e-6
        checked += 1
    assert checked > 100


def test_plan_terminates_within_the_contraction_bound(pouring):
    demo = pouring.demo
    params = PlannerParams()
    goal = dq.from_translation([0.1, 0.1, 0.0]) * demo[-1]

    fp = tsia.plan(demo, demo[0], goal, params)
    bound = len(demo) + math.ceil(math.log(params.goal_tolerance) / math.log(1 - params.tau_step))
    assert len(fp) - 1 <= bound + 10


def test_goal_error_decreases_once_guided_by_the_goal(pouring):
    demo = pouring.demo
    goal = demo[-1]
    start = goal * dq.from_screw(np.array([0.0, 0.0, 1.0]), np.array([0.05, 0.0, 0.0]), 0.3, 0.05)
    errors = []

    def executor(target, step):
        if step.guide_index == len(step.imitated) - 1:
            errors.append(tsia.goal_error(target, step.goal))
        return target

    tsia.plan(demo, start, goal, PlannerParams(guiding_fraction=1.0), executor)
    assert len(errors) > 100
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_non_convergence_carries_the_partial_path():
    dp = line(10)
    with pytest.raises(NonConvergenceError) as caught:
        tsia.plan(dp, dq.IDENTITY, dq.from_translation([5.0, 0.0, 0.0]), PlannerParams(max_iterations=3))

    assert len(caught.value.path) == 4
    assert caught.value.error > 1e-3
    assert caught.value.code == 2


def test_executor_can_jump_ahead_on_the_imitated_path():
    dp = line(10)
    goal = dp[-1]
    guides = []

    def executor(target, step):
        guides.append(step.guide_index)
        if step.iteration == 0:
            return Execution([target, step.imitated[5]], guide_index=5)
        return target

    fp = tsia.plan(dp, dq.from_translation([0.0, 0.1, 0.0]), goal, step_executor=executor)
    assert guides[:3] == [2, 6, 7]
    assert dq.same_pose(fp[2], dp[5])


def test_dwell_in_the_demonstration_does_not_change_the_plan(pouring):
    demo = pouring.demo
    dwell = PosePath([demo[0]] * 3 + list(demo) + [demo[-1]] * 2)
    goal = dq.from_translation([0.0, 0.1, 0.0]) * demo[-1]

    fp = tsia.plan(demo, demo[0], goal)
    assert max_deviation(tsia.plan(dwell, demo[0], goal), fp) == 0.0


def test_plan_sequence_chains_goals():
    dp = line(10)
    goals = [dq.from_translation([1.0, 0.5, 0.0]), dq.from_translation([0.0, 1.0, 0.0])]
    paths = tsia.plan_sequence(dp, dq.IDENTITY, goals)
    assert len(paths) == 2
    assert paths[1][0] is paths[0][-1]
    for path, goal in zip(paths, goals):
        assert tsia.goal_error(path[-1], goal) <= 1e-3


def test_plan_starting_at_the_goal():
    dp = line(10)
    goal = dq.from_translation([0.9, 0.0, 0.0])
    calls = []
    fp = tsia.plan(dp, goal, goal, step_executor=lambda target, step: calls.append(step) or target)
    assert len(fp) == 2
    assert fp[0] is goal and fp[-1] is goal
    assert fp.kind == tsia.FINAL
    assert calls == []
