// SPDX-License-Identifier: Apache-2.0

pub mod benchgen;
pub mod eval;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod localize;
pub mod ml;
pub mod netlist;
