// file header
package a.b;

import java.util.*;

public class Mix48 {
    Runnable task() {
        java.util.function.Function<String, Integer> len = s -> s.length();
        return () -> { System.out.println("run " + len.apply("x")); };
    }

    String quoted() {
        String a = "she said \"hi\"";
        String b = "back\\slash\\";
        String c = "\\\"";
        return a + b + c;
    }
}
