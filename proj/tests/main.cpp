#include <catch_amalgamated.hpp>

#include "stlf/core/runtime.hpp"

int main(int argc, char** argv) {
	stlf::tune_allocator();
	return Catch::Session().run(argc, argv);
}
