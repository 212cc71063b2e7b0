#include "embercall/cli.hpp"

int main(int argc, char** argv) { return embercall::run_cli(argc, argv); }
