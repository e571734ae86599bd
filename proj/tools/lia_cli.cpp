#include "lia/cli_impl.hpp"

int main(int argc, char** argv) { return lia::cli_main(argc, argv); }
