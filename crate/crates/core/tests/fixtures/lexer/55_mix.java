package demo.lexer;

public class Mix55 {
    @SuppressWarnings({"unchecked", "rawtypes"})
    @Deprecated(since = "1.2", forRemoval = true)
    void legacy() {}

    String url() {
        return "http://example.org/path // not a comment";
    }
    String block() { return "/* also not a comment */"; }

    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }

    Runnable task() {
        java.util.function.Function<String, Integer> len = s -> s.length();
        return () -> { System.out.println("run " + len.apply("x")); };
    }

    int x = 1; // trailing "comment" with 'quotes'
    int y = 2; /* trailing block */ int z = 3;

    // prints "hello" and then "world
    /* a "string" that never closes: " */
    void greet() { System.out.println("hello"); }
}
