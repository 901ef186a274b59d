import numpy as np
import pytest
from numpy.testing import assert_allclose

from motion import dq
from motion.exceptions import DimensionError, ModelError
from motion.kinematics import (
    REVOLUTE,
    Joint,
    SerialManipulator,
    forward_kinematics,
    joints_from_dh,
    load_robot,
    pose_and_jacobian,
    pose_jacobian,
    translation_jacobian,
)


def finite_difference_jacobian(model, q, h=1e-6):
    columns = []
    for i in range(model.dof):
        step = np.zeros(model.dof)
        step[i] = h
        forward = forward_kinematics(model, q + step).vec()
        backward = forward_kinematics(model, q - step).vec()
        columns.append((forward - backward) / (2 * h))
    return np.column_stack(columns)


def one_joint_arm(point=(0.0, 0.0, 0.0), offset=(1.0, 0.0, 0.0)):
    joint = Joint(REVOLUTE, np.array([0.0, 0.0, 1.0]), np.asarray(point, dtype=float), -np.pi, np.pi)
    return SerialManipulator("one", (joint,), ee_offset=dq.from_translation(offset))


def test_planar2_forward_kinematics(planar2):
    x = forward_kinematics(planar2, [0.0, 0.0])
    assert_allclose(dq.translation(x), [2, 0, 0], atol=1e-15)
    assert_allclose(x.primary, [1, 0, 0, 0])

    x = forward_kinematics(planar2, [np.pi / 2, 0.0])
    assert_allclose(dq.translation(x), [0, 2, 0], atol=1e-12)
    assert_allclose(x.primary, dq.quat_from_axis_angle([0, 0, 1], np.pi / 2), atol=1e-12)

    x = forward_kinematics(planar2, [np.pi / 2, -np.pi / 2])
    assert_allclose(dq.translation(x), [1, 1, 0], atol=1e-12)


def test_home_poses(planar3, spatial7):
    assert_allclose(dq.translation(forward_kinematics(planar3, np.zeros(3))), [0.75, 0, 0.4], atol=1e-12)
    assert_allclose(forward_kinematics(planar3, np.zeros(3)).primary, [0, 1, 0, 0], atol=1e-12)
    assert_allclose(
        dq.translation(forward_kinematics(spatial7, np.zeros(7))), [0.088, 0, 0.926], atol=1e-12
    )
    assert_allclose(forward_kinematics(spatial7, np.zeros(7)).vec(), spatial7.home_pose().vec(), atol=1e-12)


def test_base_pose_acts_on_the_left(model, random_pose, random_config):
    g = random_pose()
    moved = model.with_base(g * model.base)
    for _ in range(20):
        q = random_config(model)
        assert_allclose(
            forward_kinematics(moved, q).vec(), (g * forward_kinematics(model, q)).vec(), atol=1e-9
        )
        assert_allclose(
            pose_jacobian(moved, q), dq.hamilton_plus(g) @ pose_jacobian(model, q), atol=1e-9
        )


def test_forward_kinematics_is_unit(model, random_config):
    for _ in range(1000):
        x = forward_kinematics(model, random_config(model))
        assert abs(np.linalg.norm(x.primary) - 1.0) < 1e-9
        assert abs(np.dot(x.primary, x.dual)) < 1e-9
        assert np.all(np.isfinite(x.vec()))


def test_jacobian_matches_finite_differences(model, random_config):
    for _ in range(100):
        q = random_config(model)
        assert np.max(np.abs(pose_jacobian(model, q) - finite_difference_jacobian(model, q))) < 1e-5


def test_pose_and_jacobian(model, random_config):
    q = random_config(model)
    x, jac = pose_and_jacobian(model, q)
    assert jac.shape == (8, model.dof)
    assert_allclose(x.vec(), forward_kinematics(model, q).vec())


def test_translation_jacobian_of_one_joint():
    model = one_joint_arm()
    x, jac = pose_and_jacobian(model, [0.0])
    # v = ω × r for ω = z and r = (1, 0, 0)
    assert_allclose(translation_jacobian(x, jac)[:, 0], [0, 1, 0], atol=1e-12)


def test_joint_through_the_end_effector_does_not_move_it():
    arm = one_joint_arm(point=(1.0, 0.0, 0.0))
    x, jac = pose_and_jacobian(arm, [0.3])
    assert_allclose(translation_jacobian(x, jac), np.zeros((3, 1)), atol=1e-12)
    assert np.linalg.norm(jac) > 0.0


def test_translation_jacobian_matches_finite_differences(model, random_config):
    h = 1e-6
    for _ in range(20):
        q = random_config(model)
        x, jac = pose_and_jacobian(model, q)
        expected = np.column_stack(
            [
                (
                    dq.translation(forward_kinematics(model, q + h * e))
                    - dq.translation(forward_kinematics(model, q - h * e))
                )
                / (2 * h)
                for e in np.eye(model.dof)
            ]
        )
        assert_allclose(translation_jacobian(x, jac), expected, atol=1e-6)


def test_configuration_size_is_checked(planar2):
    with pytest.raises(DimensionError):
        forward_kinematics(planar2, [0.0, 0.0, 0.0])
    with pytest.raises(DimensionError):
        pose_jacobian(planar2, [0.0])


def test_dh_rows_match_the_screw_description(planar2, random_config):
    joints, home = joints_from_dh([(1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)])
    model = SerialManipulator("dh", tuple(joints), ee_offset=home)
    for _ in range(20):
        q = random_config(planar2)
        assert dq.same_pose(forward_kinematics(model, q), forward_kinematics(planar2, q), tol=1e-12)


def test_load_bundled_models(planar2, spatial7):
    assert planar2.dof == 2
    assert spatial7.dof == 7
    assert spatial7.qdot_max.shape == (7,)
    assert np.all(planar2.lower < planar2.upper)


def test_load_robot_rejects_bad_limits(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(
        "name: bad\n"
        "ee_offset: [1, 0, 0, 1, 0, 0, 0]\n"
        "joints:\n"
        "  - axis: [0, 0, 1]\n"
        "    limits: [1.0, -1.0]\n"
    )
    with pytest.raises(ModelError):
        load_robot(str(path))


def test_load_robot_from_file(tmp_path):
    path = tmp_path / "slider.yaml"
    path.write_text(
        "name: slider\n"
        "ee_offset: [0, 0, 0.1, 1, 0, 0, 0]\n"
        "joints:\n"
        "  - type: prismatic\n"
        "    axis: [2, 0, 0]\n"
        "    limits: [-0.5, 0.5]\n"
    )
    model = load_robot(str(path))
    assert_allclose(dq.translation(forward_kinematics(model, [0.25])), [0.25, 0, 0.1], atol=1e-12)


def test_load_robot_errors(tmp_path):
    with pytest.raises(ModelError):
        load_robot("no-such-robot")

    path = tmp_path / "broken.yaml"
    path.write_text("name: broken\njoints: [{axis: [0, 0, 1]}]\n")
    with pytest.raises(ModelError):
        load_robot(str(path))

    path = tmp_path / "dof.yaml"
    path.write_text(
        "dof: 3\nee_offset: [1, 0, 0, 1, 0, 0, 0]\njoints: [{axis: [0, 0, 1], limits: [-1, 1]}]\n"
    )
    with pytest.raises(ModelError):
        load_robot(str(path))
