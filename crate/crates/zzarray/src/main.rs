fn main() {
    std::process::exit(zzarray::cli::run(std::env::args_os()));
}
