#include "entroflow/cli.hpp"

int main(int argc, char** argv) { return entroflow::cli::run(argc, argv); }
