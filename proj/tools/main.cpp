#include "gtdl/cli.hpp"

int main(int argc, char** argv) { return gtdl::dispatch(argc, argv); }
