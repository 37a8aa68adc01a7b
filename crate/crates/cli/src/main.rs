fn main() {
    let code = rdm_cli::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
