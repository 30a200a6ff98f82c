fn main() {
    std::process::exit(groupwork_core::cli::run(std::env::args_os()));
}
