//! Motion-data augmentation toolkit.
//!
//! A reference human pose sequence goes through three stages:
//!
//! 1. [`vae`]: an autoregressive beta-VAE with a mixture-of-experts decoder
//!    generates variants of the sequence frame by frame, guided by the
//!    ground truth (best-of-N sampling plus range refinement).
//! 2. [`physopt`]: a per-frame quadratic program tracks the generated
//!    motion with a dual PD controller on a floating-base rigid-body model,
//!    estimating joint torques and reaction forces without contact labels,
//!    and simulates the corrected motion.
//! 3. [`imusynth`]: virtual IMU accelerations and orientations are derived
//!    from the result at six body sites.
//!
//! Supporting modules: [`rotmath`] (rotation forms), [`motion`] (skeleton,
//! frames, files, synthetic data), [`tensornet`] (reverse-mode autodiff),
//! [`dynamics`] (mass matrix, bias forces, Jacobians), [`qp`] (augmented
//! Lagrangian QP solver), [`metrics`] and [`cli`].

pub mod cli;
pub mod dynamics;
pub mod imusynth;
pub mod metrics;
pub mod motion;
pub mod physopt;
pub mod qp;
pub mod rotmath;
pub mod tensornet;
pub mod vae;
