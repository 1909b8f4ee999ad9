fn main() {
    std::process::exit(weakmeter_cli::main_with_args(std::env::args_os()));
}
