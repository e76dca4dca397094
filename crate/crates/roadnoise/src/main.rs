fn main() {
    std::process::exit(roadnoise::run_command(std::env::args_os()));
}
