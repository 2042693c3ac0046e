fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(netflow_cli::run(args));
}
