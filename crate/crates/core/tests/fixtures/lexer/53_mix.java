public class Mix53 {
    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }

    String kind(int n) {
        return switch (n) {
            case 1 -> "one";
            case 2 -> { yield "two"; }
            default -> "many";
        };
    }

    /**
     * Computes a value. Uses "quotes" and // markers in docs.
     * @param x the input, see {@link Math#abs(int)}
     * @return twice {@code x}
     */
    public int twice(int x) { return 2 * x; }

    int x = 1; // trailing "comment" with 'quotes'
    int y = 2; /* trailing block */ int z = 3;

    String unicode() {
        String grüße = "héllo wörld ✓";
        return grüße + "\u00e9";
    }
}
