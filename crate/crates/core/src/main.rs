fn main() {
    std::process::exit(copula_rank::cli::main_entry());
}
