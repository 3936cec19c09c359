// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(spinforge_cli::run(std::env::args_os()));
}
