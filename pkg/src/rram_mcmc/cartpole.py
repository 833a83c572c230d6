"""Self-contained cart-pole environment (classic Barto et al. dynamics).

Explicit Euler integration of the cart and pole equations of motion, as in
the widely used public benchmark.  Observation order is
``(x, v, theta, omega)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEFT = 0
RIGHT = 1


class EpisodeOverError(RuntimeError):
    pass


@dataclass(frozen=True)
class CartpolePhysics:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    force: float = 10.0
    tau: float = 0.02
    angle_limit_deg: float = 15.0
    x_limit: float = 2.4
    max_steps: int = 500
    init_range: float = 0.05

    def __post_init__(self):
        if self.angle_limit_deg <= 0 or self.x_limit <= 0 or self.max_steps < 1:
            raise ValueError("cart-pole limits must be positive")

    @property
    def angle_limit(self) -> float:
        return math.radians(self.angle_limit_deg)


@dataclass
class CartpoleState:
    x: float = 0.0
    v: float = 0.0
    theta: float = 0.0
    omega: float = 0.0
    step_count: int = 0
    done: bool = False

    def observation(self) -> tuple[float, float, float, float]:
        return (self.x, self.v, self.theta, self.omega)


def initial_state(env_seed: int, phys: CartpolePhysics) -> CartpoleState:
    r = phys.init_range
    x, v, th, om = np.random.default_rng(env_seed).uniform(-r, r, 4)
    return CartpoleState(float(x), float(v), float(th), float(om))


def _derivatives(phys: CartpolePhysics, v, theta, omega, force):
    total = phys.cart_mass + phys.pole_mass
    pml = phys.pole_mass * phys.half_length
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    temp = (force + pml * omega * omega * sin_t) / total
    theta_acc = (phys.gravity * sin_t - cos_t * temp) / (
        phys.half_length * (4.0 / 3.0 - phys.pole_mass * cos_t * cos_t / total)
    )
    x_acc = temp - pml * theta_acc * cos_t / total
    return x_acc, theta_acc


def cartpole_step(state: CartpoleState, action: int, phys: CartpolePhysics):
    """Advance one timestep; returns ``(new_state, reward, done)``.

    Reward is +1 for every step taken, the terminating one included.
    """
    if state.done:
        raise EpisodeOverError("cart-pole step after the episode ended")
    force = phys.force if action == RIGHT else -phys.force
    x_acc, theta_acc = _derivatives(phys, state.v, state.theta, state.omega, force)
    tau = phys.tau
    nxt = CartpoleState(
        x=state.x + tau * state.v,
        v=state.v + tau * x_acc,
        theta=state.theta + tau * state.omega,
        omega=state.omega + tau * theta_acc,
        step_count=state.step_count + 1,
    )
    nxt.done = not (
        abs(nxt.theta) < phys.angle_limit
        and abs(nxt.x) < phys.x_limit
        and nxt.step_count < phys.max_steps
    )
    return nxt, 1, nxt.done


def run_linear_episode(w_left, w_right, env_seed: int, phys: CartpolePhysics, trajectory=None) -> int:
    """Cumulative reward of one episode under winner-take-all linear responses.

    The action is LEFT when ``w_left . obs >= w_right . obs`` (ties go left).
    This is the hot loop of RL training, so it works on plain floats.
    """
    l0, l1, l2, l3 = (float(u) for u in w_left)
    r0, r1, r2, r3 = (float(u) for u in w_right)
    s = initial_state(env_seed, phys)
    x, v, th, om = s.x, s.v, s.theta, s.omega
    g, mc, mp, hl, fm, tau = (
        phys.gravity,
        phys.cart_mass,
        phys.pole_mass,
        phys.half_length,
        phys.force,
        phys.tau,
    )
    total = mc + mp
    pml = mp * hl
    lim_t, lim_x, max_steps = phys.angle_limit, phys.x_limit, phys.max_steps
    reward = 0
    while True:
        left = l0 * x + l1 * v + l2 * th + l3 * om
        right = r0 * x + r1 * v + r2 * th + r3 * om
        action = LEFT if left >= right else RIGHT
        if trajectory is not None:
            trajectory.append((reward, x, v, th, om, action))
        force = fm if action == RIGHT else -fm
        cos_t, sin_t = math.cos(th), math.sin(th)
        temp = (force + pml * om * om * sin_t) / total
        th_acc = (g * sin_t - cos_t * temp) / (hl * (4.0 / 3.0 - mp * cos_t * cos_t / total))
        x_acc = temp - pml * th_acc * cos_t / total
        x, v, th, om = x + tau * v, v + tau * x_acc, th + tau * om, om + tau * th_acc
        reward += 1
        if not (abs(th) < lim_t and abs(x) < lim_x and reward < max_steps):
            return reward
