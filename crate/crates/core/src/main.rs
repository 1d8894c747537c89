fn main() {
    std::process::exit(branchlight::cli::run(std::env::args_os()));
}
