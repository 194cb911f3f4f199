// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment runner for the `qerc` binary.

pub mod config;
pub mod experiments;
pub mod output;
