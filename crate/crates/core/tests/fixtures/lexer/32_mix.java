/* license-free header */
public class Mix32 {
    Runnable task() {
        java.util.function.Function<String, Integer> len = s -> s.length();
        return () -> { System.out.println("run " + len.apply("x")); };
    }

    int x = 1; // trailing "comment" with 'quotes'
    int y = 2; /* trailing block */ int z = 3;

    long numbers() {
        long big = 1_000_000L;
        double h = 0x1.8p1;
        int bin = 0b1010_1010;
        float f = 3.5e-2f;
        return big + (long) h + bin + (long) f;
    }

    String unicode() {
        String grüße = "héllo wörld ✓";
        return grüße + "\u00e9";
    }

    // prints "hello" and then "world
    /* a "string" that never closes: " */
    void greet() { System.out.println("hello"); }
}
