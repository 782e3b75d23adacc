fn main() {
    std::process::exit(qbnf::cli::run(std::env::args_os(), |k| std::env::var(k).ok()));
}
