#include "atme/run.hpp"

int main(int argc, char** argv) { return atme::cli::run(argc, argv); }
