// Placeholder main; subcommands land once the library modules are in place.
int main() { return 0; }
