"""Closed-loop episode execution.

Step order (one simulation step): share state, extract gate features,
predict fidelity, advance the hysteresis switch, reassign goals if due,
plan A*, force the reactive branch (with the switch logged 0) when planning
is infeasible, arbitrate, apply the recovery override, resolve simultaneous
moves, fuse sensing at the new poses, advance dynamic obstacles, and run the
margin-gated online gate update on its interval. The episode ends when no
frontiers remain (success) or the horizon is exhausted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import allocators, assignment, gate, execution, metrics, variants
from .config import RunConfig
from .errors import ConfigurationError
from .grid import (
    Action,
    Cell,
    CellState,
    DistanceField,
    GridMap,
    apply_action,
    bfs_distance_field,
    extract_frontiers,
    feasible_actions,
    frontier_mask,
    sense_and_fuse,
    step_dynamic_obstacles,
)
from .scenario import generate_scenario
from .variants import (
    ARBITRATION_GATED,
    ARBITRATION_PLANNER_STRICT,
    ARBITRATION_REACTIVE,
    Variant,
    default_warm_gate_path,
)


@dataclass
class _Robot:
    rid: int
    pose: Cell
    rng: np.random.Generator
    params: gate.GateParams
    state: gate.GateState
    history: gate.HistoryBuffer
    recovery: execution.RecoveryState = field(default_factory=execution.RecoveryState)
    goal: Optional[Cell] = None
    goal_is_probe: bool = False
    last_planner_ok: bool = True
    plan_fail_streak: int = 0
    prev_hyst_switch: int = 1
    # per-step scratch
    z: Optional[np.ndarray] = None
    p: float = 0.5


def _initial_gate_params(config: RunConfig, variant: Variant) -> gate.GateParams:
    g = config.gate
    params = gate.GateParams.cold(lr=g.lr, l2=g.l2, margin=g.margin)
    if variant.gate_init == "warm":
        path = variant.gate_file or default_warm_gate_path()
        try:
            w, b = gate.load_gate_file(path)
        except OSError as exc:
            raise ConfigurationError(f"cannot load warm gate file {path!r}: {exc}") from exc
        params = gate.GateParams(w=w, b=b, lr=g.lr, l2=g.l2, margin=g.margin)
    return params


def _cheb(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _publish_goal(
    robot: "_Robot",
    goal: Optional[Cell],
    t: int,
    shared: GridMap,
    frontiers: list[Cell],
    fields: list[DistanceField],
    occ_evidence: np.ndarray,
    claimed: set,
    reassign_every: int,
) -> None:
    """Install a robot's round result, probing when nothing was assignable.

    A still-valid probe goal is kept between periodic rounds (the weighted
    probe search is the priciest part of a round, and reachability of real
    frontiers is re-checked every round regardless).
    """
    if goal is None:
        cached = robot.goal
        if (
            robot.goal_is_probe
            and cached is not None
            and t % reassign_every != 0
            and shared.is_free(cached)
            and fields[robot.rid].dist[cached] >= 0
        ):
            goal = cached
        else:
            goal = assignment.probe_goal(
                shared, robot.pose, frontiers, occ_evidence, avoid=claimed
            )
        robot.goal_is_probe = goal is not None
    else:
        robot.goal_is_probe = False
    if goal is not None:
        claimed.add(goal)
    if goal != robot.goal:
        robot.plan_fail_streak = 0
    robot.goal = goal


def run_episode(
    config: RunConfig,
    variant: Variant,
    reactive_policy: execution.ReactivePolicy = execution.local_nav_policy,
    collect_gate_pairs: Optional[list] = None,
) -> metrics.EpisodeRecord:
    """Run one deterministic episode and return its full step log."""
    config.validate()
    sc = config.scenario
    horizon = sc.effective_horizon()
    scenario = generate_scenario(sc)
    truth = scenario.truth
    shared = GridMap.full(sc.height, sc.width)
    obstacles = scenario.obstacles
    sweights = config.gate.surrogate_weights()

    initial_switch = 0 if variant.arbitration == ARBITRATION_REACTIVE else config.gate.initial_switch
    robots = [
        _Robot(
            rid=i,
            pose=pose,
            rng=scenario.robot_rngs[i],
            params=_initial_gate_params(config, variant),
            state=gate.GateState(
                s=initial_switch,
                tau_high=config.gate.tau_high,
                tau_low=config.gate.tau_low,
                dwell=config.gate.dwell,
            ),
            history=gate.HistoryBuffer(config.gate.window),
            prev_hyst_switch=initial_switch,
        )
        for i, pose in enumerate(scenario.starts)
    ]

    record = metrics.EpisodeRecord(
        width=sc.width,
        height=sc.height,
        n_robots=sc.n_robots,
        seed=sc.seed,
        variant=variant.tag,
        horizon=horizon,
    )

    # Evidence of how often each cell was re-sensed as occupied; steers the
    # probe fallback away from verified-solid walls.
    occ_evidence = np.zeros((sc.height, sc.width), dtype=np.int32)

    def fuse_from(pose: Cell, obstacle_cells) -> int:
        newly = sense_and_fuse(shared, truth, obstacle_cells, pose, sc.sense_radius)
        r0 = max(0, pose[0] - sc.sense_radius)
        r1 = min(sc.height, pose[0] + sc.sense_radius + 1)
        c0 = max(0, pose[1] - sc.sense_radius)
        c1 = min(sc.width, pose[1] + sc.sense_radius + 1)
        window = shared.cells[r0:r1, c0:c1]
        occ_evidence[r0:r1, c0:c1] += window == int(CellState.OCC)
        return newly

    # Robots share one map; the initial sweep happens before the first step.
    for robot in robots:
        fuse_from(robot.pose, obstacles.occupied())

    t = 0
    while True:
        fmask = frontier_mask(shared)
        if not fmask.any():
            record.t_star = t
            record.success = True
            record.terminal = metrics.TERMINAL_COMPLETE
            break
        if t >= horizon:
            record.terminal = metrics.TERMINAL_HORIZON
            break

        obstacle_cells = obstacles.occupied()
        poses = [robot.pose for robot in robots]
        fields = [bfs_distance_field(shared, pose) for pose in poses]
        feasible_sets = [
            feasible_actions(shared, pose, poses[:i] + poses[i + 1 :], obstacle_cells)
            for i, pose in enumerate(poses)
        ]

        for i, robot in enumerate(robots):
            robot.z = gate.extract_features(
                shared,
                robot.pose,
                robot.goal,
                poses[:i] + poses[i + 1 :],
                fields[i],
                len(feasible_sets[i]),
                robot.history,
                robot.last_planner_ok,
                sense_radius=sc.sense_radius,
                interact_radius=sc.interact_radius,
            )
            robot.p = gate.predict(robot.params, robot.z)
            robot.state = gate.update_hysteresis(robot.state, robot.p)

        marked = [
            robot.rid
            for robot in robots
            if assignment.should_reassign(
                t, config.assignment.reassign_every, robot.goal, robot.pose
            )
        ]
        if marked:
            frontiers = extract_frontiers(shared)
            if variant.allocator == "coupled":
                goals_prev = [robot.goal for robot in robots]
                subsets = assignment.voronoi_filter(frontiers, fields)
                utils = assignment.utilities(shared, frontiers, sc.sense_radius)
                frontier_utils = {f: int(utils[k]) for k, f in enumerate(frontiers)}
                goal_fields: dict[Cell, Optional[DistanceField]] = {}
                for g in goals_prev:
                    if g is not None and g not in goal_fields:
                        goal_fields[g] = (
                            bfs_distance_field(shared, g) if shared.is_free(g) else None
                        )
                new_goals = {
                    rid: assignment.assign_target(
                        rid,
                        shared,
                        frontiers,
                        poses,
                        goals_prev,
                        fields,
                        goal_fields,
                        robots[rid].p if variant.couple_assignment else 1.0,
                        config.assignment,
                        sc.sense_radius,
                        subsets=subsets,
                        frontier_utils=frontier_utils,
                    )
                    for rid in marked
                }
                claimed = {
                    robot.goal
                    for robot in robots
                    if robot.rid not in new_goals and robot.goal is not None
                }
                for rid in sorted(new_goals):
                    _publish_goal(
                        robots[rid], new_goals[rid], t, shared, frontiers, fields,
                        occ_evidence, claimed, config.assignment.reassign_every,
                    )
            else:
                # Baseline allocators recompute the whole team's goals.
                claimed = set()
                for robot, g in zip(robots, allocators.allocate(variant.allocator, frontiers, fields)):
                    _publish_goal(
                        robot, g, t, shared, frontiers, fields,
                        occ_evidence, claimed, config.assignment.reassign_every,
                    )

        intended: list[Action] = []
        plans: list[execution.PlanResult] = []
        exec_switches: list[int] = []
        recovering_flags: list[bool] = []
        for i, robot in enumerate(robots):
            blocked = [
                p for j, p in enumerate(poses) if j != i and _cheb(p, robot.pose) <= sc.sense_radius
            ]
            blocked.extend(o for o in obstacle_cells if _cheb(o, robot.pose) <= sc.sense_radius)
            plan = execution.plan_astar(shared, robot.pose, robot.goal, blocked)
            robot.last_planner_ok = plan.ok

            if variant.arbitration == ARBITRATION_GATED:
                s_exec = robot.state.s
            elif variant.arbitration == ARBITRATION_REACTIVE:
                s_exec = 0
            else:
                s_exec = 1

            planner_intent = s_exec == 1
            if plan.ok or not planner_intent:
                robot.plan_fail_streak = 0
            else:
                robot.plan_fail_streak += 1

            forced = planner_intent and not plan.ok
            if forced:
                s_exec = 0

            if variant.arbitration == ARBITRATION_PLANNER_STRICT:
                # Planner-only execution: infeasible steps hold position.
                proposed = plan.action
            else:
                if s_exec == 0:
                    obs = execution.build_observation(
                        shared,
                        robot.pose,
                        robot.goal,
                        poses[:i] + poses[i + 1 :],
                        obstacle_cells,
                        feasible_sets[i],
                        sc.sense_radius,
                    )
                    reactive = reactive_policy(obs, robot.rng)
                else:
                    reactive = Action.STAY
                proposed = execution.arbitrate(s_exec, plan, reactive)

            was_recovering = robot.recovery.active
            action, robot.recovery, recovering = execution.recovery_override(
                proposed,
                robot.recovery,
                robot.history,
                feasible_sets[i],
                robot.rid,
                t,
                recovery_len=config.execution.recovery_len,
                osc_threshold=config.execution.osc_threshold,
                plan_fail_streak=robot.plan_fail_streak,
            )
            if recovering and not was_recovering:
                # The trigger consumed the evidence; the streak restarts.
                robot.plan_fail_streak = 0
            if action not in feasible_sets[i]:
                action = Action.STAY
            intended.append(action)
            plans.append(plan)
            exec_switches.append(s_exec)
            recovering_flags.append(recovering)

        executed, risks, contacts = execution.resolve_collisions(intended, poses, obstacle_cells)
        for robot, action in zip(robots, executed):
            robot.pose = apply_action(robot.pose, action)

        newly_step = 0
        newly_per_robot = []
        for robot in robots:
            newly = fuse_from(robot.pose, obstacle_cells)
            newly_per_robot.append(newly)
            newly_step += newly

        obstacles = step_dynamic_obstacles(obstacles, truth, [r.pose for r in robots], t)

        for i, robot in enumerate(robots):
            # Oscillation tracking counts hysteresis-state changes only;
            # forced one-step fallbacks are the planner's infeasibility
            # showing and already feed the infeasible-streak trigger.
            if variant.arbitration == ARBITRATION_GATED:
                flip = robot.state.s != robot.prev_hyst_switch
                robot.prev_hyst_switch = robot.state.s
            else:
                flip = False
            robot.history.append(
                gate.StepRecord(
                    pose=poses[i],
                    newly_seen=newly_per_robot[i],
                    goal_dist=plans[i].cost if plans[i].ok else None,
                    risk_events=risks[i],
                    switch_flip=flip,
                    planner_ok=plans[i].ok,
                )
            )

        if t % config.gate.update_every == 0:
            for robot in robots:
                q = gate.surrogate_score(robot.history, sweights)
                label = gate.pseudo_label(q)
                if collect_gate_pairs is not None and abs(q) >= robot.params.margin:
                    collect_gate_pairs.append((robot.z.copy(), label))
                if variant.gate_online:
                    robot.params = gate.online_update(robot.params, robot.z, robot.p, label, q)

        record.steps.append(
            metrics.StepLog(
                t=t,
                robots=tuple(
                    metrics.RobotStepLog(
                        pose=poses[i],
                        action=int(executed[i]),
                        switch=exec_switches[i],
                        p=robots[i].p,
                        recovering=recovering_flags[i],
                        risk_events=risks[i],
                        contact=contacts[i],
                        planner_ok=plans[i].ok,
                    )
                    for i in range(len(robots))
                ),
                newly_known=newly_step,
            )
        )

        if config.metrics.strict_contact and any(contacts):
            record.terminal = metrics.TERMINAL_CONTACT
            break

        t += 1

    return record


def run_episode_with_metrics(
    config: RunConfig,
    variant: Variant,
    reactive_policy: execution.ReactivePolicy = execution.local_nav_policy,
    timing: bool = False,
) -> tuple[metrics.EpisodeRecord, metrics.EpisodeMetrics]:
    start = time.perf_counter() if timing else 0.0
    record = run_episode(config, variant, reactive_policy)
    wall = (time.perf_counter() - start) if timing else 0.0
    m = metrics.episode_metrics(
        record,
        alpha=config.metrics.alpha,
        lambda_omega=config.metrics.lambda_omega,
        wall_time=wall,
    )
    return record, m
