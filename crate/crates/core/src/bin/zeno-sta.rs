fn main() {
    std::process::exit(zeno_sta::harness::cli::main_with_args(std::env::args_os()));
}
