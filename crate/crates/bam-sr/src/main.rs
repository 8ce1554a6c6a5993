use std::process::ExitCode;

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. `bam-sr count | head`)
    // instead of panicking on the next print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(bam_sr::cli::run() as u8)
}
