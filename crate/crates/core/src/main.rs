// the solver allocates many short-lived grid-sized buffers
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() {
    std::process::exit(euler_mvs::cli::main_with_args(std::env::args_os()));
}
