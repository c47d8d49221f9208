// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let code = clockdm::cli::main_with_args(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
