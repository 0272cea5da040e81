fn main() {
    std::process::exit(msm_core::cli::run_command(std::env::args_os()));
}
