fn main() {
    std::process::exit(dfpo_core::cli::run(std::env::args_os()));
}
