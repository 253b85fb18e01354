/* license-free header */
public class Mix22 {
    String unicode() {
        String grüße = "héllo wörld ✓";
        return grüße + "\u00e9";
    }

    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;

    // prints "hello" and then "world
    /* a "string" that never closes: " */
    void greet() { System.out.println("hello"); }

    Runnable task() {
        java.util.function.Function<String, Integer> len = s -> s.length();
        return () -> { System.out.println("run " + len.apply("x")); };
    }
}
