// Regenerates the scenario files under scenarios/ from the builders.

#include <fstream>
#include <iostream>

#include "ers/builders.hpp"

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "scenarios";
  auto emit = [&](const std::string& name, const ers::harness::Scenario& s) {
    std::ofstream out(dir + "/" + name + ".json");
    out << s.to_json().dump(2) << "\n";
    std::cout << dir << "/" << name << ".json\n";
  };
  emit("simple", ers::harness::make_simple());
  emit("conference", ers::harness::make_conference());
  emit("truck", ers::harness::make_truck());
  emit("competing_writers", ers::harness::make_competing_writers());
  return 0;
}
