fn main() {
    std::process::exit(build2vec_cli::app::run(std::env::args_os()));
}
