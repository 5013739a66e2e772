fn main() {
    std::process::exit(upwind_gsbp::cli::run(std::env::args_os()));
}
