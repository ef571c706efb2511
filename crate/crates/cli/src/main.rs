fn main() {
    std::process::exit(corrgress_cli::run(std::env::args_os()));
}
