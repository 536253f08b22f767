fn main() {
    std::process::exit(implicit_nade::cli::run(std::env::args_os()));
}
