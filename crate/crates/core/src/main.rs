fn main() {
    let code = fea::cli::run(std::env::args(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
