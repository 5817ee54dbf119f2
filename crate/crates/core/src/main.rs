fn main() {
    std::process::exit(seasonvol::cli::run(std::env::args_os()));
}
