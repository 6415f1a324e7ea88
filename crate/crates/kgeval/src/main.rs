use clap::Parser;

/// Restore the default SIGPIPE disposition so that piping output into
/// `head` & co. terminates the process quietly instead of panicking.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() {
    reset_sigpipe();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = kgeval::cli::Cli::parse();
    if let Err(err) = kgeval::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
