fn main() {
    std::process::exit(rftrigger::cli::main_with_args(std::env::args_os()));
}
