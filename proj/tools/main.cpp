#include "ragtts/cli.hpp"

int main(int argc, char** argv) { return ragtts::run_cli(argc, argv); }
