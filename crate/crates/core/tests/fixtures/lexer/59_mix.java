public class Mix59 {
    // prints "hello" and then "world
    /* a "string" that never closes: " */
    void greet() { System.out.println("hello"); }

    int x = 1; // trailing "comment" with 'quotes'
    int y = 2; /* trailing block */ int z = 3;

    static class Inner {
        int value() { return 42; }
        class Deeper { void go() { new Object() { public String toString() { return "anon"; } }; } }
    }

    /**/ int a = 1; /***/ int b = 2;
    /* /* not nested */ int c = 3;

    String quoted() {
        String a = "she said \"hi\"";
        String b = "back\\slash\\";
        String c = "\\\"";
        return a + b + c;
    }
}
